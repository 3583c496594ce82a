#include "modrwkv/pipeline/compressor.hpp"

#include <cmath>

namespace modrwkv {

void CompressorConfig::validate() const {
    if (passthrough()) return;
    if (kernel < 1 || stride < 1)
        throw ConfigError("compressor requires kernel >= 1 and stride >= 1 (or the (0,0) sentinel)");
}

std::size_t output_length(std::size_t L, std::size_t k, std::size_t s, std::size_t p) {
    if (k < 1 || s < 1) throw ConfigError("output_length requires kernel >= 1 and stride >= 1");
    if (L + 2 * p < k)
        throw ShapeError("input too short: L=" + std::to_string(L) + " with padding " +
                         std::to_string(p) + " is shorter than kernel " + std::to_string(k));
    return (L + 2 * p - k) / s + 1;
}

Var conv1d_compress(const Var& feats, const Var& weight, const Var& bias,
                    const CompressorConfig& cfg) {
    if (cfg.passthrough()) return feats;
    cfg.validate();
    if (cfg.c_in == 0 || cfg.c_out == 0)
        throw ConfigError("compressor channel counts must be resolved before use");
    const std::size_t L = feats.shape()[0];
    const std::size_t C = feats.shape()[1];
    if (C != cfg.c_in)
        throw ShapeError("compressor expects " + std::to_string(cfg.c_in) + " channels, got " +
                         std::to_string(C));
    const std::size_t Lp = output_length(L, cfg.kernel, cfg.stride, cfg.padding);

    Var padded = feats;
    if (cfg.padding > 0) {
        Var pad = Var::constant(Tensor::zeros({cfg.padding, C}));
        padded = concat_rows(concat_rows(pad, feats), pad);
    }
    std::vector<Var> out_rows;
    out_rows.reserve(Lp);
    for (std::size_t t = 0; t < Lp; ++t) {
        Var window = rows_range(padded, t * cfg.stride, cfg.kernel);  // [k×C_in]
        Var flat = reshape(window, {cfg.kernel * cfg.c_in});
        Var y = reshape(matmul(reshape(flat, {1, cfg.kernel * cfg.c_in}), weight), {cfg.c_out});
        out_rows.push_back(add(y, bias));
    }
    return stack_rows(out_rows);
}

FeatureSequence conv1d_compress(const FeatureSequence& fs, const Tensor& weight,
                                const Tensor& bias, const CompressorConfig& cfg) {
    FeatureSequence out;
    out.modality = fs.modality;
    out.meta = fs.meta;
    out.features =
        conv1d_compress(Var::constant(fs.features), Var::constant(weight), Var::constant(bias), cfg)
            .val();
    return out;
}

void init_compressor_params(ParameterStore& store, const CompressorConfig& cfg, RngStream& rng) {
    if (cfg.passthrough()) return;
    cfg.validate();
    const std::size_t fan_in = cfg.kernel * cfg.c_in;
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in + cfg.c_out));
    Tensor w({fan_in, cfg.c_out});
    for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.normal(0.0, std);
    store.add("compressor.weight", std::move(w));
    store.add("compressor.bias", Tensor::zeros({cfg.c_out}));
}

}  // namespace modrwkv
