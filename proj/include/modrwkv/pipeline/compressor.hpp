#pragma once

#include "modrwkv/core/param.hpp"
#include "modrwkv/core/rng.hpp"
#include "modrwkv/core/tape.hpp"
#include "modrwkv/pipeline/feature.hpp"

namespace modrwkv {

// Strided 1-D convolution used to shorten modality sequences before the
// adapter. The sentinel (kernel=0, stride=0) means "no compression": the
// input passes through unchanged.
struct CompressorConfig {
    std::size_t kernel = 0;
    std::size_t stride = 0;
    std::size_t padding = 0;
    std::size_t c_in = 0;
    std::size_t c_out = 0;

    bool passthrough() const { return kernel == 0 && stride == 0; }
    void validate() const;
};

// L' = floor((L + 2p - k)/s) + 1; throws when L + 2p < k.
std::size_t output_length(std::size_t L, std::size_t k, std::size_t s, std::size_t p);

// Convolution weight is stored as [k·C_in × C_out]: row (j·C_in + i) holds
// the tap for input channel i at kernel position j, so a flattened window
// (k consecutive feature rows) multiplies it directly. Bias is [C_out].
// Zero padding of width p is applied at both ends.
Var conv1d_compress(const Var& feats, const Var& weight, const Var& bias,
                    const CompressorConfig& cfg);

// Untracked convenience over a FeatureSequence.
FeatureSequence conv1d_compress(const FeatureSequence& fs, const Tensor& weight,
                                const Tensor& bias, const CompressorConfig& cfg);

// Creates "compressor.weight" / "compressor.bias" (no-op for the sentinel).
void init_compressor_params(ParameterStore& store, const CompressorConfig& cfg, RngStream& rng);

}  // namespace modrwkv
