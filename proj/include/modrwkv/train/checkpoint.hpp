#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "modrwkv/core/param.hpp"
#include "modrwkv/core/rng.hpp"
#include "modrwkv/train/optimizer.hpp"

namespace modrwkv {

// Binary checkpoint: magic "MRWK", u32 version, u64 header length, a JSON
// header (config, RNG state, training progress, sorted tensor directory),
// raw little-endian f64 tensor payloads, and a trailing FNV-1a64 checksum of
// the payload. save→load→save is byte-identical. Writes are atomic
// (temp file, fsync, rename).
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainProgress {
    std::string phase = "init";  // init | phase1 | phase2 | done
    std::size_t step = 0;        // steps completed within that phase
};

struct CheckpointExtra {
    nlohmann::json config;  // canonical run config
    RngStream::State rng{};
    bool has_optim = false;
    OptimState optim;
    TrainProgress progress;
};

void save_checkpoint(const ParameterStore& params, const CheckpointExtra& extra,
                     const std::string& path);

struct LoadedCheckpoint {
    ParameterStore params;
    CheckpointExtra extra;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Header-only view for `inspect`: config plus tensor directory.
nlohmann::json inspect_checkpoint(const std::string& path);

}  // namespace modrwkv
