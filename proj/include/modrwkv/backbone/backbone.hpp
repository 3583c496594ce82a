#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "modrwkv/core/param.hpp"
#include "modrwkv/core/rng.hpp"
#include "modrwkv/core/tape.hpp"

namespace modrwkv {

#ifndef MODRWKV_ENABLE_CHECKS
#define MODRWKV_ENABLE_CHECKS 1
#endif

struct BackboneConfig {
    std::size_t n_layers = 2;
    std::size_t d_model = 64;
    std::size_t n_heads = 1;
    std::size_t vocab_size = 256;
    std::size_t ffn_ratio = 4;  // hidden width multiplier of the channel-mix FFN

    std::size_t d_head() const { return d_model / n_heads; }
    void validate() const;
};

// Per-layer, per-head recurrent state. Its size depends on the config only,
// never on sequence length; that fixed footprint is what makes streaming
// inference constant-memory.
struct WKVState {
    std::vector<std::vector<Tensor>> s;  // [layer][head], each d_head×d_head
    std::uint64_t timestep = 0;

    static WKVState zeros(const BackboneConfig& cfg);
    std::size_t byte_size() const;
};

// ---- reference recurrences (test baselines) ----

// h' = W h + U x
Tensor linear_rnn_step(const Tensor& h, const Tensor& x, const Tensor& W, const Tensor& U);

// S' = e^{-w} ∘ S + k vᵀ, decay applied per key channel (row-wise); expects
// w >= 0 elementwise (pass the exp of a raw projection).
Tensor decay_step(const Tensor& S, const Tensor& k, const Tensor& v, const Tensor& w);

// ---- RWKV7 time mixing ----

// Weight handles for one layer, bound either to a tape (training) or to the
// raw parameter tensors (inference). Projection matrices are stored [in×out]
// and applied to row vectors.
struct BoundLayer {
    Var w_r, w_k, w_v, w_a, w_w, w_w_bias, w_o;
    Var ffn1, ffn2;
    Var n1_scale, n1_offset, n2_scale, n2_offset;
};

struct BoundModel {
    Var embed, head, nout_scale, nout_offset;
    std::vector<BoundLayer> layers;
};

// Per-head projections for one position: r raw, k unit-normalized, a in (0,1)
// via sigmoid, v raw, w unbounded (decays through neg_exp_exp downstream).
struct MixInputs {
    std::vector<Var> r, k, a, v, w;  // one entry per head, each [d_head]
};
MixInputs project_mixing_inputs(const Var& x, const BoundLayer& L, const BackboneConfig& cfg);

// One state update: S' = (I - a k kᵀ) diag(e^{-e^w}) S + a k vᵀ, computed
// without materializing the transition matrix; readout o = S'ᵀ r.
// `a` is the per-head scalar in-context learning rate.
std::pair<Var, Var> wkv7_step(const Var& S, const Var& r, const Var& k, const Var& v,
                              const Var& a, const Var& w);

// y = W_ffn2 · relu(W_ffn1 · x)
Var channel_mix(const Var& x, const BoundLayer& L);

Var layer_norm(const Var& x, const Var& scale, const Var& offset, double eps = 1e-5);

class Backbone {
public:
    Backbone(ParameterStore& store, BackboneConfig cfg);

    const BackboneConfig& config() const { return cfg_; }

    // Creates all backbone parameters under "backbone.*". Projections are
    // Glorot-normal; the decay projection starts at a constant -0.5 output
    // (initial decay exp(-exp(-0.5)) ≈ 0.545); embedding is Normal(0, 0.02).
    static void init_weights(ParameterStore& store, const BackboneConfig& cfg, RngStream& rng);

    BoundModel bind(Tape* tape) const;

    // Time-mixing block of one layer over one position; updates head states.
    Var time_mix_step(const BoundLayer& L, const Var& x, std::vector<Var>& head_states) const;

    // Full trunk for one position (pre-norm residual layers + final norm).
    Var trunk_step(const BoundModel& m, const Var& x,
                   std::vector<std::vector<Var>>& state_vars) const;

    // Time-mixing block of layer `layer` folded over a sequence [L×d_model];
    // returns per-position outputs and the final recurrent state.
    std::pair<Var, WKVState> wkv7_scan(std::size_t layer, const Var& inputs, Tape* tape,
                                       const WKVState* state0 = nullptr) const;

    struct TrunkOut {
        Var hidden;  // [L×d_model], after the final norm
        WKVState state;
    };
    TrunkOut run_trunk(const BoundModel& m, const Var& embedded,
                       const WKVState* state0 = nullptr) const;
    TrunkOut forward_trunk(const Var& embedded, Tape* tape, const WKVState* state0 = nullptr) const;

    struct LmOut {
        Var logits;  // [L×vocab]
        WKVState state;
    };
    LmOut forward_lm(const Var& embedded, Tape* tape, const WKVState* state0 = nullptr) const;

    // Embeds token ids (rows of the embedding table).
    Var embed_tokens(const BoundModel& m, const std::vector<int>& tokens) const;

    ParameterStore& store() const { return store_; }

private:
    std::vector<std::vector<Var>> bind_state(const WKVState* state0) const;
    WKVState export_state(const std::vector<std::vector<Var>>& sv, std::uint64_t timestep) const;

    ParameterStore& store_;
    BackboneConfig cfg_;
};

// Token-at-a-time decoding over a frozen model: feeds one embedding through
// the trunk per call with no tape, so memory stays flat over any horizon.
class InferenceSession {
public:
    explicit InferenceSession(const Backbone& bb);

    void reset();
    Tensor step_token(int token);                 // returns logits [vocab]
    Tensor step_embedding(const Tensor& x);       // x is [d_model]
    int greedy_step(int token);                   // argmax of step_token

    const WKVState& state() const { return state_; }

private:
    const Backbone& bb_;
    WKVState state_;
};

}  // namespace modrwkv
