#pragma once

#include <string>
#include <vector>

#include "modrwkv/eval/report.hpp"
#include "modrwkv/train/trainer.hpp"

namespace modrwkv {

struct EvalReport {
    std::string task;
    std::vector<std::pair<std::string, double>> metrics;
    std::vector<std::string> per_sample;  // one line per sample
    double runtime_seconds = 0.0;
    std::uint64_t config_hash = 0;

    double metric(const std::string& name) const;
    Table to_table() const;
};

// Teacher-forced answer-token accuracy plus WER/CER of greedy decodes
// against the reference answers.
EvalReport evaluate_caption(ModelBundle& model, const Dataset& data);

// Standardized-scale MSE with last-value-carry-forward and seasonal-naive
// baselines for context.
EvalReport evaluate_forecast(ModelBundle& model, const Dataset& data, std::size_t season_length = 0);

EvalReport evaluate_task(ModelBundle& model, const Dataset& data);

// Greedy decode of n_tokens after the modality+prompt prefix.
std::vector<int> greedy_decode(ModelBundle& model, const Sample& sample, std::size_t n_tokens);

// Last-value and seasonal-naive forecasts of one standardized window.
std::vector<double> last_value_forecast(const Sample& s, std::size_t lookback, std::size_t horizon);
std::vector<double> seasonal_naive_forecast(const Sample& s, std::size_t lookback,
                                            std::size_t horizon, std::size_t season);

}  // namespace modrwkv
