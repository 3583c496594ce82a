#include "modrwkv/train/optimizer.hpp"

#include <cmath>

namespace modrwkv {

void adam_step(ParameterStore& params, OptimState& opt, double lr, const AdamConfig& cfg) {
    if (!(lr >= 0.0)) throw DomainError("learning rate must be non-negative");

    // validate grads before mutating anything, so an abort leaves params intact
    params.for_each([&](Parameter& p) {
        if (!p.trainable) return;
        for (std::size_t i = 0; i < p.grad.numel(); ++i)
            if (std::isnan(p.grad[i]))
                throw TrainAbort("NaN gradient in parameter " + p.name + "; step aborted");
    });

    ++opt.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.t));

    params.for_each([&](Parameter& p) {
        if (!p.trainable) return;
        auto it = opt.moments.find(p.name);
        if (it == opt.moments.end()) {
            it = opt.moments
                     .emplace(p.name, OptimState::Moments{Tensor::zeros(p.value.shape()),
                                                          Tensor::zeros(p.value.shape())})
                     .first;
        }
        Tensor& m = it->second.m;
        Tensor& v = it->second.v;
        for (std::size_t i = 0; i < p.value.numel(); ++i) {
            const double g = p.grad[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p.value[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    });
}

double clip_global_norm(ParameterStore& params, double max_norm) {
    double sq = 0.0;
    params.for_each([&](Parameter& p) {
        if (!p.trainable) return;
        for (std::size_t i = 0; i < p.grad.numel(); ++i) sq += p.grad[i] * p.grad[i];
    });
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        params.for_each([&](Parameter& p) {
            if (!p.trainable) return;
            for (std::size_t i = 0; i < p.grad.numel(); ++i) p.grad[i] *= s;
        });
    }
    return norm;
}

}  // namespace modrwkv
