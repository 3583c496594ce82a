#pragma once

#include "modrwkv/core/param.hpp"
#include "modrwkv/core/rng.hpp"
#include "modrwkv/core/tape.hpp"

namespace modrwkv {

// Single-MLP adapter aligning encoder feature width to the backbone width:
// h = Linear2(ReLU(Linear1(x))) applied independently per position. The
// hidden width is exactly scale·d_in. An optional layer norm on the raw
// features ("adapter.norm.*") precedes Linear1 in the training pipeline.
struct AdapterConfig {
    std::size_t d_in = 0;
    std::size_t scale = 4;  // 2, 4 or 8 in the scaling protocol
    std::size_t d_out = 0;
    bool input_norm = true;

    std::size_t hidden() const { return scale * d_in; }
    std::size_t param_count() const;  // weights + biases (+ norm pair when enabled)
    void validate() const;
};

// Positionwise MLP on [L×d_in] rows; biases broadcast over positions.
Var adapt(const Var& feats, const Var& w1, const Var& b1, const Var& w2, const Var& b2);

// Positionwise layer norm over the channel axis of [L×C] rows.
Var rowwise_layer_norm(const Var& feats, const Var& scale, const Var& offset, double eps = 1e-5);

void init_adapter_params(ParameterStore& store, const AdapterConfig& cfg, RngStream& rng);

}  // namespace modrwkv
