#include "modrwkv/pipeline/adapter.hpp"

#include <cmath>

namespace modrwkv {

void AdapterConfig::validate() const {
    if (d_in == 0 || d_out == 0) throw ConfigError("adapter widths must be positive");
    if (scale != 2 && scale != 4 && scale != 8)
        throw ConfigError("adapter scale must be 2, 4 or 8, got " + std::to_string(scale));
}

std::size_t AdapterConfig::param_count() const {
    std::size_t n = d_in * hidden() + hidden()        // linear1 weight + bias
                    + hidden() * d_out + d_out;       // linear2 weight + bias
    if (input_norm) n += 2 * d_in;
    return n;
}

Var adapt(const Var& feats, const Var& w1, const Var& b1, const Var& w2, const Var& b2) {
    const std::size_t L = feats.shape()[0];
    const std::size_t d_in = feats.shape()[1];
    if (w1.shape()[0] != d_in)
        throw ShapeError("adapter expects width " + std::to_string(w1.shape()[0]) + ", got " +
                         std::to_string(d_in));
    Var ones = Var::constant(Tensor::full({L}, 1.0));
    Var hidden = relu(add(matmul(feats, w1), outer(ones, b1)));
    return add(matmul(hidden, w2), outer(ones, b2));
}

Var rowwise_layer_norm(const Var& feats, const Var& scale_v, const Var& offset, double eps) {
    const std::size_t L = feats.shape()[0];
    const std::size_t C = feats.shape()[1];
    Var ones = Var::constant(Tensor::full({L}, 1.0));
    Var m = reduce_mean(feats, 1);                       // [L]
    Var centered = sub(feats, outer(m, Var::constant(Tensor::full({C}, 1.0))));
    Var variance = reduce_mean(mul(centered, centered), 1);  // [L]
    Var denom = sqrt(add_const(variance, eps));
    Var normed = divide(centered, outer(denom, Var::constant(Tensor::full({C}, 1.0))));
    return add(mul(normed, outer(ones, scale_v)), outer(ones, offset));
}

void init_adapter_params(ParameterStore& store, const AdapterConfig& cfg, RngStream& rng) {
    cfg.validate();
    auto glorot = [&rng](std::size_t fan_in, std::size_t fan_out) {
        const double std = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
        Tensor t({fan_in, fan_out});
        for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, std);
        return t;
    };
    if (cfg.input_norm) {
        store.add("adapter.norm.scale", Tensor::full({cfg.d_in}, 1.0));
        store.add("adapter.norm.offset", Tensor::zeros({cfg.d_in}));
    }
    store.add("adapter.linear1.weight", glorot(cfg.d_in, cfg.hidden()));
    store.add("adapter.linear1.bias", Tensor::zeros({cfg.hidden()}));
    store.add("adapter.linear2.weight", glorot(cfg.hidden(), cfg.d_out));
    store.add("adapter.linear2.bias", Tensor::zeros({cfg.d_out}));
}

}  // namespace modrwkv
