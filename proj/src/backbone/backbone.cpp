#include "modrwkv/backbone/backbone.hpp"

#include <cmath>
#include <string>

namespace modrwkv {

namespace {

#if MODRWKV_ENABLE_CHECKS
void contract(bool cond, const char* msg) {
    if (!cond) throw ContractError(msg);
}
#else
inline void contract(bool, const char*) {}
#endif

Var var_ref(const Tensor& t) { return Var::constant(t); }

// y = x · W for a row vector x, W stored [in×out]
Var matvec(const Var& x, const Var& W) {
    const std::size_t in = x.shape()[0];
    const std::size_t out = W.shape()[1];
    return reshape(matmul(reshape(x, {1, in}), W), {out});
}

std::string layer_name(std::size_t i, const char* suffix) {
    return "backbone.layer" + std::to_string(i) + "." + suffix;
}

}  // namespace

void BackboneConfig::validate() const {
    if (n_heads == 0 || d_model == 0 || vocab_size == 0)
        throw ConfigError("backbone dims must be positive");
    if (d_model % n_heads != 0)
        throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                          std::to_string(n_heads));
    if (ffn_ratio < 1) throw ConfigError("ffn_ratio must be >= 1");
}

WKVState WKVState::zeros(const BackboneConfig& cfg) {
    WKVState st;
    st.s.resize(cfg.n_layers);
    for (auto& layer : st.s) {
        layer.reserve(cfg.n_heads);
        for (std::size_t h = 0; h < cfg.n_heads; ++h)
            layer.push_back(Tensor::zeros({cfg.d_head(), cfg.d_head()}));
    }
    return st;
}

std::size_t WKVState::byte_size() const {
    std::size_t bytes = 0;
    for (const auto& layer : s)
        for (const auto& m : layer) bytes += m.numel() * sizeof(double);
    return bytes;
}

Tensor linear_rnn_step(const Tensor& h, const Tensor& x, const Tensor& W, const Tensor& U) {
    Tensor wh = matmul(W, reshape(h, {h.dim(0), 1}));
    Tensor ux = matmul(U, reshape(x, {x.dim(0), 1}));
    return reshape(elementwise(Binary::add, wh, ux), {W.dim(0)});
}

Tensor decay_step(const Tensor& S, const Tensor& k, const Tensor& v, const Tensor& w) {
    const std::size_t dk = S.dim(0), dv = S.dim(1);
    Tensor out({dk, dv});
    for (std::size_t i = 0; i < dk; ++i) {
        const double decay = std::exp(-w[i]);
        for (std::size_t j = 0; j < dv; ++j) out.at(i, j) = decay * S.at(i, j) + k[i] * v[j];
    }
    return out;
}

MixInputs project_mixing_inputs(const Var& x, const BoundLayer& L, const BackboneConfig& cfg) {
    if (x.shape() != Tensor::Shape{cfg.d_model})
        throw ShapeError("mixing input width " + shape_str(x.shape()) + " != d_model " +
                         std::to_string(cfg.d_model));
    const std::size_t dh = cfg.d_head();
    Var r_full = matvec(x, L.w_r);
    Var k_full = matvec(x, L.w_k);
    Var v_full = matvec(x, L.w_v);
    Var a_full = sigmoid(matvec(x, L.w_a));
    Var w_full = add(matvec(x, L.w_w), L.w_w_bias);

    MixInputs mi;
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
        const std::size_t off = h * dh;
        Var kh = slice(k_full, off, dh);
        // unit-normalize per head; the 1e-16 under the root adds 1e-8 to the
        // norm of a zero key while leaving unit keys exact to ~1e-16
        Var norm = sqrt(add_const(reduce_sum(mul(kh, kh)), 1e-16));
        kh = divide(kh, norm);
        mi.r.push_back(slice(r_full, off, dh));
        mi.k.push_back(kh);
        mi.a.push_back(slice(a_full, off, dh));
        mi.v.push_back(slice(v_full, off, dh));
        mi.w.push_back(slice(w_full, off, dh));
    }
    return mi;
}

std::pair<Var, Var> wkv7_step(const Var& S, const Var& r, const Var& k, const Var& v,
                              const Var& a, const Var& w) {
    const std::size_t dk = S.shape()[0], dv = S.shape()[1];
    contract(k.shape() == Tensor::Shape{dk} && r.shape() == Tensor::Shape{dk} &&
                 v.shape() == Tensor::Shape{dv} && w.shape() == Tensor::Shape{dk},
             "wkv7_step operand shapes inconsistent with state");
#if MODRWKV_ENABLE_CHECKS
    {
        double n2 = 0.0;
        for (std::size_t i = 0; i < dk; ++i) n2 += k.val()[i] * k.val()[i];
        contract(std::abs(std::sqrt(n2) - 1.0) < 1e-6, "wkv7_step requires a unit-norm key");
        const double av = a.val().item();
        contract(av >= -1e-12 && av <= 1.0 + 1e-12, "wkv7_step learning rate outside [0,1]");
    }
#endif
    Var decay = neg_exp_exp(w);  // (0,1) per key channel
    Var ones_v = Var::constant(Tensor::full({dv}, 1.0));
    Var decayed = mul(S, outer(decay, ones_v));  // diag decay applied column-wise
    Var u = reshape(matmul(reshape(k, {1, dk}), decayed), {dv});
    Var s1 = sub(decayed, mul(outer(k, u), a));
    Var s2 = add(s1, mul(outer(k, v), a));
    Var o = reshape(matmul(reshape(r, {1, dk}), s2), {dv});
    return {s2, o};
}

Var channel_mix(const Var& x, const BoundLayer& L) {
    return matvec(relu(matvec(x, L.ffn1)), L.ffn2);
}

Var layer_norm(const Var& x, const Var& scale, const Var& offset, double eps) {
    Var centered = sub(x, reduce_mean(x));
    Var variance = reduce_mean(mul(centered, centered));
    Var denom = sqrt(add_const(variance, eps));
    return add(mul(divide(centered, denom), scale), offset);
}

Backbone::Backbone(ParameterStore& store, BackboneConfig cfg) : store_(store), cfg_(cfg) {
    cfg_.validate();
}

void Backbone::init_weights(ParameterStore& store, const BackboneConfig& cfg, RngStream& rng) {
    cfg.validate();
    const std::size_t d = cfg.d_model;
    auto glorot = [&rng](std::size_t fan_in, std::size_t fan_out) {
        const double std = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
        Tensor t({fan_in, fan_out});
        for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, std);
        return t;
    };

    Tensor embed({cfg.vocab_size, d});
    for (std::size_t i = 0; i < embed.numel(); ++i) embed[i] = rng.normal(0.0, 0.02);
    store.add("backbone.embed", std::move(embed));

    for (std::size_t i = 0; i < cfg.n_layers; ++i) {
        store.add(layer_name(i, "w_r"), glorot(d, d));
        store.add(layer_name(i, "w_k"), glorot(d, d));
        store.add(layer_name(i, "w_v"), glorot(d, d));
        store.add(layer_name(i, "w_a"), glorot(d, d));
        // decay projection starts flat: zero weights plus a -0.5 bias give
        // every channel the same moderate initial decay
        store.add(layer_name(i, "w_w"), Tensor::zeros({d, d}));
        store.add(layer_name(i, "w_w_bias"), Tensor::full({d}, -0.5));
        store.add(layer_name(i, "w_o"), glorot(d, d));
        store.add(layer_name(i, "ffn1"), glorot(d, cfg.ffn_ratio * d));
        store.add(layer_name(i, "ffn2"), glorot(cfg.ffn_ratio * d, d));
        store.add(layer_name(i, "norm1.scale"), Tensor::full({d}, 1.0));
        store.add(layer_name(i, "norm1.offset"), Tensor::zeros({d}));
        store.add(layer_name(i, "norm2.scale"), Tensor::full({d}, 1.0));
        store.add(layer_name(i, "norm2.offset"), Tensor::zeros({d}));
    }
    store.add("backbone.norm_out.scale", Tensor::full({d}, 1.0));
    store.add("backbone.norm_out.offset", Tensor::zeros({d}));
    store.add("backbone.head", glorot(d, cfg.vocab_size));
}

BoundModel Backbone::bind(Tape* tape) const {
    auto get = [&](const std::string& name) -> Var {
        Parameter& p = store_.at(name);
        return tape ? tape->leaf(p) : var_ref(p.value);
    };
    BoundModel m;
    m.embed = get("backbone.embed");
    m.head = get("backbone.head");
    m.nout_scale = get("backbone.norm_out.scale");
    m.nout_offset = get("backbone.norm_out.offset");
    for (std::size_t i = 0; i < cfg_.n_layers; ++i) {
        BoundLayer L;
        L.w_r = get(layer_name(i, "w_r"));
        L.w_k = get(layer_name(i, "w_k"));
        L.w_v = get(layer_name(i, "w_v"));
        L.w_a = get(layer_name(i, "w_a"));
        L.w_w = get(layer_name(i, "w_w"));
        L.w_w_bias = get(layer_name(i, "w_w_bias"));
        L.w_o = get(layer_name(i, "w_o"));
        L.ffn1 = get(layer_name(i, "ffn1"));
        L.ffn2 = get(layer_name(i, "ffn2"));
        L.n1_scale = get(layer_name(i, "norm1.scale"));
        L.n1_offset = get(layer_name(i, "norm1.offset"));
        L.n2_scale = get(layer_name(i, "norm2.scale"));
        L.n2_offset = get(layer_name(i, "norm2.offset"));
        m.layers.push_back(std::move(L));
    }
    return m;
}

Var Backbone::time_mix_step(const BoundLayer& L, const Var& x, std::vector<Var>& head_states) const {
    MixInputs mi = project_mixing_inputs(x, L, cfg_);
    std::vector<Var> outs;
    outs.reserve(cfg_.n_heads);
    for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
        Var a_scalar = reduce_mean(mi.a[h]);
        auto [s_next, o] = wkv7_step(head_states[h], mi.r[h], mi.k[h], mi.v[h], a_scalar, mi.w[h]);
        head_states[h] = s_next;
        outs.push_back(o);
    }
    Var o_all = cfg_.n_heads == 1 ? outs[0] : concat(outs);
    return matvec(o_all, L.w_o);
}

Var Backbone::trunk_step(const BoundModel& m, const Var& x,
                         std::vector<std::vector<Var>>& state_vars) const {
    Var cur = x;
    for (std::size_t i = 0; i < cfg_.n_layers; ++i) {
        const BoundLayer& L = m.layers[i];
        Var tm = time_mix_step(L, layer_norm(cur, L.n1_scale, L.n1_offset), state_vars[i]);
        cur = add(cur, tm);
        Var cm = channel_mix(layer_norm(cur, L.n2_scale, L.n2_offset), L);
        cur = add(cur, cm);
    }
    return layer_norm(cur, m.nout_scale, m.nout_offset);
}

std::vector<std::vector<Var>> Backbone::bind_state(const WKVState* state0) const {
    std::vector<std::vector<Var>> sv(cfg_.n_layers);
    for (std::size_t i = 0; i < cfg_.n_layers; ++i)
        for (std::size_t h = 0; h < cfg_.n_heads; ++h)
            sv[i].push_back(Var::constant(state0 ? state0->s[i][h]
                                                 : Tensor::zeros({cfg_.d_head(), cfg_.d_head()})));
    return sv;
}

WKVState Backbone::export_state(const std::vector<std::vector<Var>>& sv,
                                std::uint64_t timestep) const {
    WKVState st;
    st.timestep = timestep;
    st.s.resize(cfg_.n_layers);
    for (std::size_t i = 0; i < cfg_.n_layers; ++i)
        for (const auto& v : sv[i]) st.s[i].push_back(v.val());
    return st;
}

std::pair<Var, WKVState> Backbone::wkv7_scan(std::size_t layer, const Var& inputs, Tape* tape,
                                             const WKVState* state0) const {
    const std::size_t L = inputs.shape()[0];
    if (L < 1) throw ShapeError("wkv7_scan requires at least one position");
    BoundModel m = bind(tape);
    std::vector<Var> states;
    for (std::size_t h = 0; h < cfg_.n_heads; ++h)
        states.push_back(Var::constant(state0 ? state0->s[layer][h]
                                              : Tensor::zeros({cfg_.d_head(), cfg_.d_head()})));
    std::vector<Var> outs;
    outs.reserve(L);
    for (std::size_t t = 0; t < L; ++t)
        outs.push_back(time_mix_step(m.layers[layer], row(inputs, t), states));

    WKVState st = WKVState::zeros(cfg_);
    st.timestep = (state0 ? state0->timestep : 0) + L;
    for (std::size_t h = 0; h < cfg_.n_heads; ++h) st.s[layer][h] = states[h].val();
    return {stack_rows(outs), st};
}

Backbone::TrunkOut Backbone::run_trunk(const BoundModel& m, const Var& embedded,
                                       const WKVState* state0) const {
    if (embedded.shape().size() != 2 || embedded.shape()[1] != cfg_.d_model)
        throw ShapeError("trunk input must be [L×d_model], got " + shape_str(embedded.shape()));
    const std::size_t L = embedded.shape()[0];
    auto sv = bind_state(state0);
    std::vector<Var> rows;
    rows.reserve(L);
    for (std::size_t t = 0; t < L; ++t) rows.push_back(trunk_step(m, row(embedded, t), sv));
    return {stack_rows(rows), export_state(sv, (state0 ? state0->timestep : 0) + L)};
}

Backbone::TrunkOut Backbone::forward_trunk(const Var& embedded, Tape* tape,
                                           const WKVState* state0) const {
    BoundModel m = bind(tape);
    return run_trunk(m, embedded, state0);
}

Backbone::LmOut Backbone::forward_lm(const Var& embedded, Tape* tape,
                                     const WKVState* state0) const {
    BoundModel m = bind(tape);
    TrunkOut trunk = run_trunk(m, embedded, state0);
    return {matmul(trunk.hidden, m.head), std::move(trunk.state)};
}

Var Backbone::embed_tokens(const BoundModel& m, const std::vector<int>& tokens) const {
    std::vector<Var> rows;
    rows.reserve(tokens.size());
    for (int t : tokens) {
        if (t < 0 || static_cast<std::size_t>(t) >= cfg_.vocab_size)
            throw DomainError("token id " + std::to_string(t) + " outside vocab");
        rows.push_back(row(m.embed, static_cast<std::size_t>(t)));
    }
    return stack_rows(rows);
}

InferenceSession::InferenceSession(const Backbone& bb)
    : bb_(bb), state_(WKVState::zeros(bb.config())) {}

void InferenceSession::reset() { state_ = WKVState::zeros(bb_.config()); }

Tensor InferenceSession::step_embedding(const Tensor& x) {
    BoundModel m = bb_.bind(nullptr);
    const auto& cfg = bb_.config();
    std::vector<std::vector<Var>> sv(cfg.n_layers);
    for (std::size_t i = 0; i < cfg.n_layers; ++i)
        for (std::size_t h = 0; h < cfg.n_heads; ++h) sv[i].push_back(Var::constant(state_.s[i][h]));
    Var hidden = bb_.trunk_step(m, Var::constant(x), sv);
    for (std::size_t i = 0; i < cfg.n_layers; ++i)
        for (std::size_t h = 0; h < cfg.n_heads; ++h) state_.s[i][h] = sv[i][h].val();
    ++state_.timestep;
    const std::size_t d = cfg.d_model;
    Var logits = reshape(matmul(reshape(hidden, {1, d}), m.head), {cfg.vocab_size});
    return logits.val();
}

Tensor InferenceSession::step_token(int token) {
    const Tensor& embed = bb_.store().at("backbone.embed").value;
    if (token < 0 || static_cast<std::size_t>(token) >= bb_.config().vocab_size)
        throw DomainError("token id " + std::to_string(token) + " outside vocab");
    return step_embedding(row(embed, static_cast<std::size_t>(token)));
}

int InferenceSession::greedy_step(int token) {
    Tensor logits = step_token(token);
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.numel(); ++i)
        if (logits[i] > logits[best]) best = i;
    return static_cast<int>(best);
}

}  // namespace modrwkv
