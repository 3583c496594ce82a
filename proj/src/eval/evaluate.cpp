#include "modrwkv/eval/evaluate.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "modrwkv/eval/metrics.hpp"
#include "modrwkv/pipeline/fusion.hpp"
#include "modrwkv/train/losses.hpp"

namespace modrwkv {

double EvalReport::metric(const std::string& name) const {
    for (const auto& [k, v] : metrics)
        if (k == name) return v;
    throw StateError("no metric named " + name);
}

Table EvalReport::to_table() const {
    Table t;
    t.title = "task: " + task;
    t.headers = {"metric", "value"};
    for (const auto& [k, v] : metrics) t.add_row({k, format_double(v)});
    return t;
}

namespace {

std::string join_ids(const std::vector<int>& ids) {
    std::ostringstream os;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) os << ' ';
        os << ids[i];
    }
    return os.str();
}

}  // namespace

std::vector<int> greedy_decode(ModelBundle& model, const Sample& sample, std::size_t n_tokens) {
    Backbone bb = model.make_backbone();
    InferenceSession sess(bb);
    Var mod_emb = modality_embeddings(model, sample, nullptr);

    Tensor logits;
    for (std::size_t i = 0; i < mod_emb.shape()[0]; ++i)
        logits = sess.step_embedding(row(mod_emb.val(), i));
    for (int tok : sample.prompt) logits = sess.step_token(tok);

    std::vector<int> out;
    for (std::size_t i = 0; i < n_tokens; ++i) {
        const int tok = argmax_token(logits);
        out.push_back(tok);
        if (i + 1 < n_tokens) logits = sess.step_token(tok);
    }
    return out;
}

EvalReport evaluate_caption(ModelBundle& model, const Dataset& data) {
    const auto t0 = std::chrono::steady_clock::now();
    EvalReport rep;
    rep.task = "caption_copy";
    rep.config_hash = model.cfg.config_hash();

    std::size_t correct = 0, total = 0;
    std::vector<std::string> refs, hyps;
    for (const auto& sample : data) {
        SampleForward fwd = forward_sample(model, sample, nullptr);
        const std::size_t Lf = fwd.logits.dim(0);
        std::size_t sample_correct = 0, sample_total = 0;
        for (std::size_t i = 1; i < Lf; ++i) {
            if (!fwd.mask[i]) continue;
            Tensor lrow = row(fwd.logits, i - 1);
            if (argmax_token(lrow) == fwd.targets[i]) ++sample_correct;
            ++sample_total;
        }
        correct += sample_correct;
        total += sample_total;

        std::vector<int> decoded = greedy_decode(model, sample, sample.answer.size());
        refs.push_back(join_ids(sample.answer));
        hyps.push_back(join_ids(decoded));
        rep.per_sample.push_back("acc=" +
                                 format_double(static_cast<double>(sample_correct) /
                                               static_cast<double>(std::max<std::size_t>(1, sample_total))) +
                                 " ref=[" + refs.back() + "] hyp=[" + hyps.back() + "]");
    }
    const double acc = total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
    rep.metrics.emplace_back("token_accuracy", acc);
    rep.metrics.emplace_back("wer_percent", word_error_rate(refs, hyps, ErrorUnit::word));
    rep.metrics.emplace_back("cer_percent", word_error_rate(refs, hyps, ErrorUnit::chr));
    rep.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

std::vector<double> last_value_forecast(const Sample& s, std::size_t lookback, std::size_t horizon) {
    return std::vector<double>(horizon, s.series[lookback - 1]);
}

std::vector<double> seasonal_naive_forecast(const Sample& s, std::size_t lookback,
                                            std::size_t horizon, std::size_t season) {
    if (season == 0 || season > lookback) season = std::min(horizon, lookback);
    std::vector<double> out(horizon);
    for (std::size_t j = 0; j < horizon; ++j) out[j] = s.series[lookback - season + (j % season)];
    return out;
}

namespace {

double mse_of(const std::vector<double>& pred, const double* target, std::size_t h) {
    double acc = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
        const double d = pred[j] - target[j];
        acc += d * d;
    }
    return acc / static_cast<double>(h);
}

}  // namespace

EvalReport evaluate_forecast(ModelBundle& model, const Dataset& data, std::size_t season_length) {
    const auto t0 = std::chrono::steady_clock::now();
    EvalReport rep;
    rep.task = "forecast";
    rep.config_hash = model.cfg.config_hash();
    const std::size_t L = model.cfg.data.lookback, h = model.cfg.data.horizon;
    if (season_length == 0) season_length = model.cfg.eval.season_length;

    double mse_model = 0.0, mse_last = 0.0, mse_seasonal = 0.0;
    for (const auto& sample : data) {
        if (sample.series.size() != L + h)
            throw ShapeError("forecast window length " + std::to_string(sample.series.size()) +
                             " does not match lookback+horizon " + std::to_string(L + h));
        SampleForward fwd = forward_sample(model, sample, nullptr);
        const double* target = sample.series.data() + L;
        mse_model += mse_of(fwd.prediction.to_vector(), target, h);
        mse_last += mse_of(last_value_forecast(sample, L, h), target, h);
        mse_seasonal += mse_of(seasonal_naive_forecast(sample, L, h, season_length), target, h);
        rep.per_sample.push_back("mse=" + format_double(mse_of(fwd.prediction.to_vector(), target, h)));
    }
    const auto n = static_cast<double>(data.size());
    rep.metrics.emplace_back("mse", mse_model / n);
    rep.metrics.emplace_back("mse_last_value", mse_last / n);
    rep.metrics.emplace_back("mse_seasonal_naive", mse_seasonal / n);
    rep.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

EvalReport evaluate_task(ModelBundle& model, const Dataset& data) {
    if (model.cfg.data.task == "forecast") return evaluate_forecast(model, data);
    return evaluate_caption(model, data);
}

}  // namespace modrwkv
