#pragma once

#include <cstdint>
#include <string>

#include "modrwkv/core/tensor.hpp"

namespace modrwkv {

enum class Modality : std::uint8_t { image = 0, audio = 1, timeseries = 2, precomputed = 3 };

const char* modality_name(Modality m);
Modality modality_from_name(const std::string& name);

// L×C sequence of encoder features plus source metadata.
struct FeatureSequence {
    Tensor features;  // [L×C]
    Modality modality = Modality::precomputed;
    std::string meta;

    std::size_t length() const { return features.dim(0); }
    std::size_t channels() const { return features.dim(1); }
    void validate() const;  // L,C >= 1 and all entries finite
};

// MFEA container: magic "MFEA", u32 version (little-endian), u32 L, u32 C,
// u8 modality tag, then L·C little-endian f32 values row-major. Values are
// quantized to f32 on write; a load returns exactly the stored values.
inline constexpr std::uint32_t kMfeaVersion = 1;

void write_mfea(const FeatureSequence& fs, const std::string& path);
FeatureSequence load_precomputed(const std::string& path);

}  // namespace modrwkv
