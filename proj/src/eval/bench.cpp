#include "modrwkv/eval/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#ifdef __linux__
#include <sched.h>
#endif

namespace modrwkv {

namespace {

void pin_to_one_cpu() {
#ifdef __linux__
    cpu_set_t set;
    CPU_ZERO(&set);
    CPU_SET(0, &set);
    sched_setaffinity(0, sizeof(set), &set);  // best effort; timing only
#endif
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Flat-buffer greedy decoder templated on scalar width. Mirrors the trunk
// math exactly (same summation orders); used for the fp32 benchmark mode.
template <typename T>
struct FlatDecoder {
    std::size_t n_layers, d, heads, dh, vocab, ffn_hidden;
    std::vector<T> embed, head_w, nout_s, nout_o;
    struct Layer {
        std::vector<T> w_r, w_k, w_v, w_a, w_w, w_w_bias, w_o, ffn1, ffn2;
        std::vector<T> n1s, n1o, n2s, n2o;
    };
    std::vector<Layer> layers;
    std::vector<std::vector<T>> state;  // [layer], heads*dh*dh

    // work buffers
    std::vector<T> x, xn, r, k, v, a, w, o_all, y, hid, logits, u;

    static std::vector<T> flat(const Tensor& t) {
        std::vector<T> out(t.numel());
        for (std::size_t i = 0; i < t.numel(); ++i) out[i] = static_cast<T>(t[i]);
        return out;
    }

    explicit FlatDecoder(const Backbone& bb) {
        const auto& cfg = bb.config();
        n_layers = cfg.n_layers;
        d = cfg.d_model;
        heads = cfg.n_heads;
        dh = cfg.d_head();
        vocab = cfg.vocab_size;
        ffn_hidden = cfg.ffn_ratio * d;
        auto& store = bb.store();
        embed = flat(store.at("backbone.embed").value);
        head_w = flat(store.at("backbone.head").value);
        nout_s = flat(store.at("backbone.norm_out.scale").value);
        nout_o = flat(store.at("backbone.norm_out.offset").value);
        for (std::size_t i = 0; i < n_layers; ++i) {
            const std::string p = "backbone.layer" + std::to_string(i) + ".";
            Layer L;
            L.w_r = flat(store.at(p + "w_r").value);
            L.w_k = flat(store.at(p + "w_k").value);
            L.w_v = flat(store.at(p + "w_v").value);
            L.w_a = flat(store.at(p + "w_a").value);
            L.w_w = flat(store.at(p + "w_w").value);
            L.w_w_bias = flat(store.at(p + "w_w_bias").value);
            L.w_o = flat(store.at(p + "w_o").value);
            L.ffn1 = flat(store.at(p + "ffn1").value);
            L.ffn2 = flat(store.at(p + "ffn2").value);
            L.n1s = flat(store.at(p + "norm1.scale").value);
            L.n1o = flat(store.at(p + "norm1.offset").value);
            L.n2s = flat(store.at(p + "norm2.scale").value);
            L.n2o = flat(store.at(p + "norm2.offset").value);
            layers.push_back(std::move(L));
        }
        state.assign(n_layers, std::vector<T>(heads * dh * dh, T(0)));
        x.resize(d);
        xn.resize(d);
        r.resize(d);
        k.resize(d);
        v.resize(d);
        a.resize(d);
        w.resize(d);
        o_all.resize(d);
        y.resize(d);
        hid.resize(ffn_hidden);
        logits.resize(vocab);
        u.resize(dh);
    }

    void reset_state() {
        for (auto& s : state) std::fill(s.begin(), s.end(), T(0));
    }

    std::size_t state_bytes() const { return n_layers * heads * dh * dh * sizeof(T); }

    void matvec(const std::vector<T>& in, const std::vector<T>& W, std::vector<T>& out,
                std::size_t n_in, std::size_t n_out) const {
        for (std::size_t j = 0; j < n_out; ++j) {
            T acc = 0;
            for (std::size_t i = 0; i < n_in; ++i) acc += in[i] * W[i * n_out + j];
            out[j] = acc;
        }
    }

    void layer_norm(const std::vector<T>& in, const std::vector<T>& s, const std::vector<T>& o,
                    std::vector<T>& out) const {
        T mean = 0;
        for (std::size_t i = 0; i < d; ++i) mean += in[i];
        mean /= static_cast<T>(d);
        T var = 0;
        for (std::size_t i = 0; i < d; ++i) {
            const T c = in[i] - mean;
            var += c * c;
        }
        var /= static_cast<T>(d);
        const T denom = std::sqrt(var + static_cast<T>(1e-5));
        for (std::size_t i = 0; i < d; ++i) out[i] = (in[i] - mean) / denom * s[i] + o[i];
    }

    int step(int token) {
        for (std::size_t i = 0; i < d; ++i) x[i] = embed[static_cast<std::size_t>(token) * d + i];
        for (std::size_t li = 0; li < n_layers; ++li) {
            Layer& L = layers[li];
            layer_norm(x, L.n1s, L.n1o, xn);
            matvec(xn, L.w_r, r, d, d);
            matvec(xn, L.w_k, k, d, d);
            matvec(xn, L.w_v, v, d, d);
            matvec(xn, L.w_a, a, d, d);
            matvec(xn, L.w_w, w, d, d);
            for (std::size_t i = 0; i < d; ++i) {
                w[i] += L.w_w_bias[i];
                a[i] = T(1) / (T(1) + std::exp(-a[i]));
            }
            for (std::size_t h = 0; h < heads; ++h) {
                T* kh = k.data() + h * dh;
                T nrm = 0;
                for (std::size_t i = 0; i < dh; ++i) nrm += kh[i] * kh[i];
                nrm = std::sqrt(nrm + static_cast<T>(1e-16));
                for (std::size_t i = 0; i < dh; ++i) kh[i] /= nrm;
                T a_scalar = 0;
                for (std::size_t i = 0; i < dh; ++i) a_scalar += a[h * dh + i];
                a_scalar /= static_cast<T>(dh);

                T* S = state[li].data() + h * dh * dh;
                const T* rh = r.data() + h * dh;
                const T* vh = v.data() + h * dh;
                const T* wh = w.data() + h * dh;
                // decay rows, accumulate u = kᵀ (decayed S)
                std::fill(u.begin(), u.end(), T(0));
                for (std::size_t i = 0; i < dh; ++i) {
                    const T decay = std::exp(-std::exp(wh[i]));
                    T* Si = S + i * dh;
                    for (std::size_t j = 0; j < dh; ++j) {
                        Si[j] *= decay;
                        u[j] += kh[i] * Si[j];
                    }
                }
                T* oh = o_all.data() + h * dh;
                std::fill(oh, oh + dh, T(0));
                for (std::size_t i = 0; i < dh; ++i) {
                    T* Si = S + i * dh;
                    for (std::size_t j = 0; j < dh; ++j) {
                        Si[j] = Si[j] - (kh[i] * u[j]) * a_scalar + (kh[i] * vh[j]) * a_scalar;
                        oh[j] += rh[i] * Si[j];
                    }
                }
            }
            matvec(o_all, L.w_o, y, d, d);
            for (std::size_t i = 0; i < d; ++i) x[i] += y[i];
            layer_norm(x, L.n2s, L.n2o, xn);
            matvec(xn, L.ffn1, hid, d, ffn_hidden);
            for (auto& h : hid) h = h > T(0) ? h : T(0);
            matvec(hid, L.ffn2, y, ffn_hidden, d);
            for (std::size_t i = 0; i < d; ++i) x[i] += y[i];
        }
        layer_norm(x, nout_s, nout_o, xn);
        matvec(xn, head_w, logits, d, vocab);
        std::size_t best = 0;
        for (std::size_t i = 1; i < vocab; ++i)
            if (logits[i] > logits[best]) best = i;
        return static_cast<int>(best);
    }
};

template <typename T>
BenchRecord bench_flat(const Backbone& bb, std::size_t length, std::size_t trials) {
    FlatDecoder<T> dec(bb);
    // warmup
    dec.reset_state();
    int tok = 0;
    for (std::size_t i = 0; i < 32; ++i) tok = dec.step(tok);

    std::vector<double> per_token;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        dec.reset_state();
        tok = 0;
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < length; ++i) tok = dec.step(tok);
        const auto t1 = std::chrono::steady_clock::now();
        per_token.push_back(std::chrono::duration<double>(t1 - t0).count() /
                            static_cast<double>(length));
    }
    BenchRecord rec;
    rec.length = length;
    rec.seconds_per_token = median(per_token);
    rec.tokens_per_s = 1.0 / rec.seconds_per_token;
    rec.state_bytes = dec.state_bytes();
    rec.peak_alloc_bytes = dec.state_bytes();  // fixed preallocated buffers
    return rec;
}

BenchRecord bench_session(const Backbone& bb, std::size_t length, std::size_t trials) {
    InferenceSession sess(bb);
    int tok = 0;
    for (std::size_t i = 0; i < 32; ++i) tok = sess.greedy_step(tok);

    std::vector<double> per_token;
    std::size_t peak = 0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        sess.reset();
        tok = 0;
        AllocStats::reset_peak();
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < length; ++i) tok = sess.greedy_step(tok);
        const auto t1 = std::chrono::steady_clock::now();
        per_token.push_back(std::chrono::duration<double>(t1 - t0).count() /
                            static_cast<double>(length));
        peak = std::max(peak, AllocStats::peak_bytes());
    }
    BenchRecord rec;
    rec.length = length;
    rec.seconds_per_token = median(per_token);
    rec.tokens_per_s = 1.0 / rec.seconds_per_token;
    rec.state_bytes = sess.state().byte_size();
    rec.peak_alloc_bytes = peak;
    return rec;
}

}  // namespace

std::vector<BenchRecord> bench_inference(ModelBundle& model,
                                         const std::vector<std::size_t>& lengths,
                                         std::size_t trials, bool fp32) {
    if (trials < 5) trials = 5;
    pin_to_one_cpu();
    Backbone bb = model.make_backbone();
    std::vector<BenchRecord> out;
    for (std::size_t L : lengths) {
        if (L < 1) throw ConfigError("benchmark lengths must be >= 1");
        out.push_back(fp32 ? bench_flat<float>(bb, L, trials) : bench_session(bb, L, trials));
    }
    return out;
}

Table bench_table(const std::vector<BenchRecord>& records) {
    Table t;
    t.title = "streaming inference";
    t.headers = {"length", "tokens_per_s", "us_per_token", "state_bytes", "peak_alloc_bytes"};
    for (const auto& r : records)
        t.add_row({std::to_string(r.length), format_double(r.tokens_per_s),
                   format_double(r.seconds_per_token * 1e6), std::to_string(r.state_bytes),
                   std::to_string(r.peak_alloc_bytes)});
    return t;
}

std::string bench_csv(const std::vector<BenchRecord>& records) {
    std::string out = "length,tokens_per_s,state_bytes\n";
    for (const auto& r : records)
        out += std::to_string(r.length) + "," + format_double(r.tokens_per_s) + "," +
               std::to_string(r.state_bytes) + "\n";
    return out;
}

double time_sample_forward(ModelBundle& model, const Sample& sample, std::size_t repeats) {
    forward_sample(model, sample, nullptr);  // warmup
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < repeats; ++i) forward_sample(model, sample, nullptr);
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count() / static_cast<double>(repeats);
}

namespace {

// Uncompressed modality length plus text length: the source-token count a
// sample represents regardless of compression setting.
std::size_t source_tokens(const RunConfig& cfg, const Sample& s) {
    std::size_t mod = 0;
    switch (cfg.encoder.kind) {
        case EncoderSpec::Kind::image_patch:
            mod = (s.image.dim(0) / cfg.encoder.patch) * (s.image.dim(1) / cfg.encoder.patch);
            break;
        case EncoderSpec::Kind::audio_frame:
            mod = (s.series.size() - cfg.encoder.frame) / cfg.encoder.hop + 1;
            break;
        case EncoderSpec::Kind::ts_pointwise_dilated: mod = cfg.data.lookback; break;
        case EncoderSpec::Kind::ts_patch: mod = cfg.data.lookback / cfg.encoder.patch; break;
        case EncoderSpec::Kind::precomputed: mod = s.features.dim(0); break;
    }
    return mod + s.prompt.size() + s.answer.size();
}

}  // namespace

std::vector<SweepRow> compress_sweep(const RunConfig& base, std::uint64_t master_seed,
                                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                     bool quiet) {
    pin_to_one_cpu();
    std::vector<SweepRow> rows;
    for (const auto& [kernel, stride] : pairs) {
        SweepRow rowr;
        rowr.kernel = kernel;
        rowr.stride = stride;

        RunConfig cfg = base;
        cfg.compressor.kernel = kernel;
        cfg.compressor.stride = stride;

        ModelBundle model = build_model(cfg, master_seed);
        Dataset train = build_dataset(cfg, master_seed, false);
        Dataset eval_data =
            cfg.eval.split == "train" ? train : build_dataset(cfg, master_seed, true);

        // probe compressed length; degenerate pairs are skipped with a notice
        try {
            Var emb = modality_embeddings(model, eval_data.front(), nullptr);
            rowr.tokens = emb.shape()[0];
        } catch (const ShapeError& e) {
            rowr.skipped = true;
            rowr.note = e.what();
            rows.push_back(std::move(rowr));
            continue;
        }

        run_training(model, train, "", quiet);
        EvalReport rep = evaluate_task(model, eval_data);
        rowr.metric_name = rep.metrics.front().first;
        rowr.metric = rep.metrics.front().second;

        double seconds = 0.0;
        std::size_t tokens = 0;
        const std::size_t probe = std::min<std::size_t>(eval_data.size(), 8);
        for (std::size_t i = 0; i < probe; ++i) {
            seconds += time_sample_forward(model, eval_data[i]);
            tokens += source_tokens(cfg, eval_data[i]);
        }
        rowr.tokens_per_s = static_cast<double>(tokens) / seconds;
        rows.push_back(std::move(rowr));
    }
    return rows;
}

Table sweep_table(const std::vector<SweepRow>& rows) {
    Table t;
    t.title = "conv1d compression sweep";
    t.headers = {"(k,s)", "tokens", "metric", "value", "tokens_per_s", "note"};
    for (const auto& r : rows) {
        const std::string pair = "(" + std::to_string(r.kernel) + "," + std::to_string(r.stride) + ")";
        if (r.skipped)
            t.add_row({pair, "-", "-", "-", "-", "skipped: " + r.note});
        else
            t.add_row({pair, std::to_string(r.tokens), r.metric_name, format_double(r.metric),
                       format_double(r.tokens_per_s), ""});
    }
    return t;
}

std::vector<AdapterScaleRow> sweep_adapter(const RunConfig& base, std::uint64_t master_seed,
                                           const std::vector<std::size_t>& scales, bool quiet) {
    std::vector<AdapterScaleRow> rows;
    for (std::size_t scale : scales) {
        RunConfig cfg = base;
        cfg.adapter.scale = scale;
        ModelBundle model = build_model(cfg, master_seed);
        Dataset train = build_dataset(cfg, master_seed, false);
        Dataset eval_data =
            cfg.eval.split == "train" ? train : build_dataset(cfg, master_seed, true);
        run_training(model, train, "", quiet);
        EvalReport rep = evaluate_task(model, eval_data);

        AdapterScaleRow row;
        row.scale = scale;
        row.hidden = model.adapter.hidden();
        row.param_count_formula = model.adapter.param_count();
        std::size_t measured = 0;
        model.params.for_each([&](const Parameter& p) {
            if (name_has_prefix(p.name, "adapter")) measured += p.value.numel();
        });
        row.param_count = measured;
        row.metric_name = rep.metrics.front().first;
        row.metric = rep.metrics.front().second;
        rows.push_back(row);
    }
    return rows;
}

Table adapter_table(const std::vector<AdapterScaleRow>& rows) {
    Table t;
    t.title = "adapter scaling sweep";
    t.headers = {"scale", "hidden", "params", "params_formula", "metric", "value"};
    for (const auto& r : rows)
        t.add_row({std::to_string(r.scale) + "x", std::to_string(r.hidden),
                   std::to_string(r.param_count), std::to_string(r.param_count_formula),
                   r.metric_name, format_double(r.metric)});
    return t;
}

}  // namespace modrwkv
