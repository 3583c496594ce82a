#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "modrwkv/backbone/backbone.hpp"
#include "modrwkv/encoders/encoders.hpp"
#include "modrwkv/pipeline/adapter.hpp"
#include "modrwkv/pipeline/compressor.hpp"
#include "modrwkv/train/schedule.hpp"

namespace modrwkv {

struct DataConfig {
    std::string task = "caption_copy";  // caption_copy | forecast
    std::string path;                   // optional JSONL; generated when empty
    std::string series_csv;             // optional raw series for forecast windows
    std::size_t grid = 3;
    std::size_t vocab = 256;  // mirrors backbone vocab
    std::size_t n_train = 512;
    std::size_t n_eval = 128;
    std::size_t lookback = 96;
    std::size_t horizon = 24;
    std::size_t n_series = 32;
    std::size_t n_components = 2;
    double noise_sigma = 0.05;
    bool store_features = false;  // gen-data writes MFEA files instead of inline images
};

struct EvalSettings {
    std::vector<std::size_t> bench_lengths{128, 512, 8192};
    std::size_t bench_trials = 5;
    std::vector<std::pair<std::size_t, std::size_t>> sweep_pairs{{0, 0}, {3, 2}, {4, 3}, {5, 4}};
    std::vector<std::size_t> adapter_scales{2, 4, 8};
    std::size_t season_length = 0;  // 0: use the horizon
    std::string split = "fresh";    // fresh | train
};

// Whole-run description; every knob of the pipeline is addressable here.
// Unknown keys anywhere are rejected.
struct RunConfig {
    BackboneConfig backbone;
    AdapterConfig adapter;        // d_in/d_out resolved at model build time
    CompressorConfig compressor;  // c_in/c_out resolved at model build time
    EncoderSpec encoder;
    PhaseConfig phase1, phase2;
    DataConfig data;
    EvalSettings eval;

    static RunConfig defaults();
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_file(const std::string& path);
    nlohmann::json to_json() const;  // canonical (sorted keys, resolved defaults)
    std::uint64_t config_hash() const;

    void validate() const;
};

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace modrwkv
