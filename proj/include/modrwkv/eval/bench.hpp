#pragma once

#include <string>
#include <vector>

#include "modrwkv/eval/evaluate.hpp"
#include "modrwkv/train/trainer.hpp"

namespace modrwkv {

struct BenchRecord {
    std::size_t length = 0;
    double seconds_per_token = 0.0;
    double tokens_per_s = 0.0;
    std::size_t state_bytes = 0;       // identical across lengths for a fixed config
    std::size_t peak_alloc_bytes = 0;  // instrumented tensor allocation peak
};

// Greedy streaming decode benchmark: per length, median tokens/s over
// `trials` runs (warmup excluded), plus the recurrent-state footprint and the
// allocation peak observed during decode. fp32 runs a flat single-precision
// kernel with preallocated buffers (its peak equals the state bytes).
std::vector<BenchRecord> bench_inference(ModelBundle& model,
                                         const std::vector<std::size_t>& lengths,
                                         std::size_t trials = 5, bool fp32 = false);

Table bench_table(const std::vector<BenchRecord>& records);
// plot-ready CSV: length,tokens_per_s,state_bytes
std::string bench_csv(const std::vector<BenchRecord>& records);

struct SweepRow {
    std::size_t kernel = 0, stride = 0;
    std::size_t tokens = 0;  // modality tokens after compression
    std::string metric_name;
    double metric = 0.0;
    double tokens_per_s = 0.0;  // source tokens per second of inference time
    bool skipped = false;
    std::string note;
};

// Table-5-style protocol: per (kernel, stride) pair, retrain both phases from
// the same master seed, evaluate, and measure inference throughput over the
// uncompressed source tokens.
std::vector<SweepRow> compress_sweep(const RunConfig& base, std::uint64_t master_seed,
                                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                     bool quiet = true);
Table sweep_table(const std::vector<SweepRow>& rows);

struct AdapterScaleRow {
    std::size_t scale = 0;
    std::size_t hidden = 0;
    std::size_t param_count = 0;          // measured over "adapter.*"
    std::size_t param_count_formula = 0;  // closed-form shape arithmetic
    std::string metric_name;
    double metric = 0.0;
};

// Adapter-scaling protocol: retrain and evaluate at hidden multipliers
// {2,4,8} (or as configured).
std::vector<AdapterScaleRow> sweep_adapter(const RunConfig& base, std::uint64_t master_seed,
                                           const std::vector<std::size_t>& scales,
                                           bool quiet = true);
Table adapter_table(const std::vector<AdapterScaleRow>& rows);

// Mean wall-clock seconds of one untracked sample forward.
double time_sample_forward(ModelBundle& model, const Sample& sample, std::size_t repeats = 3);

}  // namespace modrwkv
