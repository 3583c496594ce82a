#include "modrwkv/train/tasks.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

namespace modrwkv {

using nlohmann::json;

double caption_level(int token, std::size_t grid) {
    const auto cells = static_cast<double>(grid * grid);
    return static_cast<double>(token - 1) / (cells + 1.0);
}

int caption_token_from_level(double level, std::size_t grid) {
    const auto cells = static_cast<double>(grid * grid);
    return static_cast<int>(std::llround(level * (cells + 1.0))) + 1;
}

Dataset gen_caption_copy(RngStream& rng, std::size_t grid, std::size_t vocab,
                         std::size_t n_samples, std::size_t patch) {
    const std::size_t cells = grid * grid;
    if (vocab < cells + 2)
        throw ConfigError("vocab " + std::to_string(vocab) + " too small for grid " +
                          std::to_string(grid) + " (needs >= " + std::to_string(cells + 2) + ")");
    if (patch == 0) throw ConfigError("patch must be positive");

    Dataset ds;
    ds.reserve(n_samples);
    for (std::size_t s = 0; s < n_samples; ++s) {
        std::vector<int> tokens(cells);
        for (std::size_t i = 0; i < cells; ++i) tokens[i] = static_cast<int>(i) + 2;
        for (std::size_t i = cells; i > 1; --i) {
            const std::size_t j = rng.uniform_index(i);
            std::swap(tokens[i - 1], tokens[j]);
        }

        Sample sample;
        sample.modality = Modality::image;
        sample.image = Tensor::zeros({grid * patch, grid * patch, 1});
        const std::size_t W = grid * patch;
        for (std::size_t r = 0; r < grid; ++r)
            for (std::size_t c = 0; c < grid; ++c) {
                const double level = caption_level(tokens[r * grid + c], grid);
                sample.image[(r * patch) * W + (c * patch)] = level;
                if (patch > 1)
                    sample.image[(r * patch + patch - 1) * W + (c * patch + patch - 1)] = 1.0;
            }
        sample.prompt = {0};
        sample.answer = std::move(tokens);
        ds.push_back(std::move(sample));
    }
    return ds;
}

namespace {

std::vector<double> sinusoid_mixture(RngStream& rng, std::size_t len, std::size_t n_components,
                                     double noise_sigma) {
    struct Component {
        double amp, period, phase;
    };
    std::vector<Component> comps;
    for (std::size_t c = 0; c < n_components; ++c)
        comps.push_back({rng.uniform(0.5, 1.5), rng.uniform(8.0, 48.0), rng.uniform(0.0, 2.0 * std::numbers::pi)});
    std::vector<double> out(len);
    for (std::size_t t = 0; t < len; ++t) {
        double v = 0.0;
        for (const auto& c : comps)
            v += c.amp * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / c.period + c.phase);
        if (noise_sigma > 0.0) v += rng.normal(0.0, noise_sigma);
        out[t] = v;
    }
    return out;
}

Sample standardized_window(const std::vector<double>& series, std::size_t start,
                           std::size_t lookback, std::size_t horizon) {
    double mean = 0.0;
    for (std::size_t i = 0; i < lookback; ++i) mean += series[start + i];
    mean /= static_cast<double>(lookback);
    double var = 0.0;
    for (std::size_t i = 0; i < lookback; ++i) {
        const double d = series[start + i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(lookback);
    double sd = std::sqrt(var);
    if (sd < 1e-8) sd = 1.0;  // constant lookback: keep values finite

    Sample s;
    s.modality = Modality::timeseries;
    s.series.resize(lookback + horizon);
    for (std::size_t i = 0; i < lookback + horizon; ++i)
        s.series[i] = (series[start + i] - mean) / sd;
    return s;
}

}  // namespace

Dataset windows_from_series(const std::vector<double>& series, std::size_t lookback,
                            std::size_t horizon) {
    if (lookback == 0 || horizon == 0) throw ConfigError("lookback and horizon must be positive");
    if (series.size() < lookback + horizon)
        throw ShapeError("series of " + std::to_string(series.size()) +
                         " values shorter than one window of " +
                         std::to_string(lookback + horizon));
    Dataset ds;
    const std::size_t count = (series.size() - lookback - horizon) / horizon + 1;
    for (std::size_t w = 0; w < count; ++w)
        ds.push_back(standardized_window(series, w * horizon, lookback, horizon));
    return ds;
}

Dataset gen_forecast(RngStream& rng, std::size_t n_series, std::size_t lookback,
                     std::size_t horizon, std::size_t n_components, double noise_sigma,
                     std::size_t series_len) {
    if (n_components == 0) throw ConfigError("forecast mixture needs at least one component");
    if (series_len == 0) series_len = lookback + 8 * horizon;
    Dataset ds;
    for (std::size_t i = 0; i < n_series; ++i) {
        auto series = sinusoid_mixture(rng, series_len, n_components, noise_sigma);
        auto windows = windows_from_series(series, lookback, horizon);
        ds.insert(ds.end(), windows.begin(), windows.end());
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    for (const auto& s : ds) {
        json j;
        j["modality"] = modality_name(s.modality);
        if (s.modality == Modality::image && s.feature_file.empty()) {
            j["image"] = {{"h", s.image.dim(0)},
                          {"w", s.image.dim(1)},
                          {"c", s.image.dim(2)},
                          {"data", s.image.to_vector()}};
        }
        if (!s.series.empty()) j["series"] = s.series;
        if (!s.feature_file.empty()) j["feature_file"] = s.feature_file;
        j["prompt"] = s.prompt;
        j["answer"] = s.answer;
        out << j.dump() << '\n';
    }
    if (!out) throw FormatError("failed writing " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open dataset " + path);
    Dataset ds;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        Sample s;
        s.modality = modality_from_name(j.at("modality").get<std::string>());
        if (j.contains("image")) {
            const auto& im = j.at("image");
            const std::size_t h = im.at("h"), w = im.at("w"), c = im.at("c");
            s.image = Tensor({h, w, c}, im.at("data").get<std::vector<double>>());
        }
        if (j.contains("series")) s.series = j.at("series").get<std::vector<double>>();
        if (j.contains("feature_file")) s.feature_file = j.at("feature_file").get<std::string>();
        if (j.contains("prompt")) s.prompt = j.at("prompt").get<std::vector<int>>();
        if (j.contains("answer")) s.answer = j.at("answer").get<std::vector<int>>();
        ds.push_back(std::move(s));
    }
    return ds;
}

}  // namespace modrwkv
