#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "modrwkv/core/param.hpp"

namespace modrwkv {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-8;
};

// First/second moment per parameter plus the shared step counter; shapes
// mirror the parameters exactly. Moments appear lazily at a parameter's
// first trainable step.
struct OptimState {
    struct Moments {
        Tensor m, v;
    };
    std::map<std::string, Moments> moments;
    std::uint64_t t = 0;
};

// Bias-corrected Adam over all trainable parameters with populated grads;
// frozen parameters are untouched. A NaN gradient aborts the step and names
// the offending parameter.
void adam_step(ParameterStore& params, OptimState& opt, double lr, const AdamConfig& cfg = {});

// Global-norm gradient clipping over trainable parameters; returns the
// pre-clip norm. max_norm <= 0 disables clipping.
double clip_global_norm(ParameterStore& params, double max_norm);

}  // namespace modrwkv
