#pragma once

#include <string>
#include <vector>

#include "modrwkv/core/rng.hpp"
#include "modrwkv/core/tensor.hpp"
#include "modrwkv/pipeline/feature.hpp"

namespace modrwkv {

// One training/eval example. Caption samples carry an inline image (or a
// precomputed feature file), forecast samples carry a standardized
// lookback+horizon window in `series`.
struct Sample {
    Modality modality = Modality::image;
    Tensor image;                       // [H×W×C]
    std::vector<double> series;         // lookback+horizon values
    std::string feature_file;           // MFEA path for precomputed samples
    Tensor features;                    // [L×C] once materialized from the file
    std::vector<int> prompt, answer;    // token ids
};

using Dataset = std::vector<Sample>;

// Token-grid captioning: the image is a grid of cells, each cell carrying one
// content token as a distinct intensity level at its top-left pixel (with a
// fixed full-intensity anchor at the bottom-right so levels survive feature
// normalization). Content tokens are ids 2..grid²+1 scattered as a random
// permutation; id 0 is the prompt token, id 1 stays reserved. The answer is
// the row-major cell token list, so exact recovery is possible by
// construction.
Dataset gen_caption_copy(RngStream& rng, std::size_t grid, std::size_t vocab,
                         std::size_t n_samples, std::size_t patch = 4);

// Intensity level of a content token and its exact inverse.
double caption_level(int token, std::size_t grid);
int caption_token_from_level(double level, std::size_t grid);

// Sinusoid-mixture forecasting windows. Each source series is a sum of
// `n_components` sinusoids with random amplitude/period/phase plus Gaussian
// noise, cut into (lookback, horizon) windows with stride = horizon. Every
// window is standardized by its lookback mean/std only, so the horizon leaks
// nothing. series_len = 0 picks a default giving eight windows per series.
Dataset gen_forecast(RngStream& rng, std::size_t n_series, std::size_t lookback,
                     std::size_t horizon, std::size_t n_components = 2,
                     double noise_sigma = 0.05, std::size_t series_len = 0);

// Windows cut from one externally supplied series (e.g. a CSV column).
Dataset windows_from_series(const std::vector<double>& series, std::size_t lookback,
                            std::size_t horizon);

// JSONL dataset file: one sample per line with keys
// {"modality", "image"|"series"|"feature_file", "prompt", "answer"}.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace modrwkv
