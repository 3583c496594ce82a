#include "modrwkv/train/runconfig.hpp"

#include <fstream>
#include <set>

namespace modrwkv {

using nlohmann::json;

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed) {
    std::uint64_t h = seed;
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

void check_keys(const json& j, const std::string& section, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError("config section \"" + section + "\" must be an object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw ConfigError("unknown key \"" + key + "\" in config section \"" + section + "\"");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void read_phase(const json& j, const std::string& section, PhaseConfig& ph) {
    check_keys(j, section,
               {"steps", "warmup_steps", "lr_start", "lr_end", "batch_size", "decay_frac", "seed",
                "trainable_groups", "beta1", "beta2", "adam_eps", "clip_norm"});
    read(j, "steps", ph.steps);
    read(j, "warmup_steps", ph.warmup_steps);
    read(j, "lr_start", ph.lr_start);
    read(j, "lr_end", ph.lr_end);
    read(j, "batch_size", ph.batch_size);
    read(j, "decay_frac", ph.decay_frac);
    read(j, "seed", ph.seed);
    read(j, "trainable_groups", ph.trainable_groups);
    read(j, "beta1", ph.adam.beta1);
    read(j, "beta2", ph.adam.beta2);
    read(j, "adam_eps", ph.adam.eps);
    read(j, "clip_norm", ph.clip_norm);
}

json phase_to_json(const PhaseConfig& ph) {
    return json{{"steps", ph.steps},
                {"warmup_steps", ph.warmup_steps},
                {"lr_start", ph.lr_start},
                {"lr_end", ph.lr_end},
                {"batch_size", ph.batch_size},
                {"decay_frac", ph.decay_frac},
                {"seed", ph.seed},
                {"trainable_groups", ph.trainable_groups},
                {"beta1", ph.adam.beta1},
                {"beta2", ph.adam.beta2},
                {"adam_eps", ph.adam.eps},
                {"clip_norm", ph.clip_norm}};
}

}  // namespace

RunConfig RunConfig::defaults() {
    RunConfig cfg;
    cfg.phase1.phase = PhaseConfig::Id::I;
    cfg.phase1.trainable_groups = {"adapter"};
    cfg.phase1.steps = 200;
    cfg.phase1.warmup_steps = 20;
    cfg.phase1.lr_start = 1e-3;
    cfg.phase1.lr_end = 1e-4;

    cfg.phase2.phase = PhaseConfig::Id::II;
    cfg.phase2.trainable_groups = {"adapter", "backbone"};
    cfg.phase2.steps = 400;
    cfg.phase2.warmup_steps = 40;
    cfg.phase2.lr_start = 3e-4;
    cfg.phase2.lr_end = 3e-5;
    return cfg;
}

RunConfig RunConfig::from_json(const json& j) {
    check_keys(j, "(top level)",
               {"backbone", "adapter", "compressor", "encoder", "phase1", "phase2", "data", "eval"});
    RunConfig cfg = defaults();

    if (j.contains("backbone")) {
        const auto& b = j.at("backbone");
        check_keys(b, "backbone", {"n_layers", "d_model", "n_heads", "vocab_size", "ffn_ratio"});
        read(b, "n_layers", cfg.backbone.n_layers);
        read(b, "d_model", cfg.backbone.d_model);
        read(b, "n_heads", cfg.backbone.n_heads);
        read(b, "vocab_size", cfg.backbone.vocab_size);
        read(b, "ffn_ratio", cfg.backbone.ffn_ratio);
    }
    if (j.contains("adapter")) {
        const auto& a = j.at("adapter");
        check_keys(a, "adapter", {"scale", "input_norm"});
        read(a, "scale", cfg.adapter.scale);
        read(a, "input_norm", cfg.adapter.input_norm);
    }
    if (j.contains("compressor")) {
        const auto& c = j.at("compressor");
        check_keys(c, "compressor", {"kernel", "stride", "padding", "c_out"});
        read(c, "kernel", cfg.compressor.kernel);
        read(c, "stride", cfg.compressor.stride);
        read(c, "padding", cfg.compressor.padding);
        read(c, "c_out", cfg.compressor.c_out);
    }
    if (j.contains("encoder")) {
        const auto& e = j.at("encoder");
        check_keys(e, "encoder",
                   {"kind", "patch", "frame", "hop", "channels", "blocks", "path", "trainable"});
        std::string kind = encoder_kind_name(cfg.encoder.kind);
        read(e, "kind", kind);
        cfg.encoder.kind = encoder_kind_from_name(kind);
        read(e, "patch", cfg.encoder.patch);
        read(e, "frame", cfg.encoder.frame);
        read(e, "hop", cfg.encoder.hop);
        read(e, "channels", cfg.encoder.channels);
        read(e, "blocks", cfg.encoder.blocks);
        read(e, "path", cfg.encoder.path);
        read(e, "trainable", cfg.encoder.trainable);
    }
    if (j.contains("phase1")) read_phase(j.at("phase1"), "phase1", cfg.phase1);
    if (j.contains("phase2")) read_phase(j.at("phase2"), "phase2", cfg.phase2);
    if (j.contains("data")) {
        const auto& d = j.at("data");
        check_keys(d, "data",
                   {"task", "path", "series_csv", "grid", "vocab", "n_train", "n_eval",
                    "lookback", "horizon", "n_series", "n_components", "noise_sigma",
                    "store_features"});
        read(d, "task", cfg.data.task);
        read(d, "path", cfg.data.path);
        read(d, "series_csv", cfg.data.series_csv);
        read(d, "grid", cfg.data.grid);
        read(d, "vocab", cfg.data.vocab);
        read(d, "n_train", cfg.data.n_train);
        read(d, "n_eval", cfg.data.n_eval);
        read(d, "lookback", cfg.data.lookback);
        read(d, "horizon", cfg.data.horizon);
        read(d, "n_series", cfg.data.n_series);
        read(d, "n_components", cfg.data.n_components);
        read(d, "noise_sigma", cfg.data.noise_sigma);
        read(d, "store_features", cfg.data.store_features);
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        check_keys(e, "eval",
                   {"bench_lengths", "bench_trials", "sweep_pairs", "adapter_scales",
                    "season_length", "split"});
        read(e, "bench_lengths", cfg.eval.bench_lengths);
        read(e, "bench_trials", cfg.eval.bench_trials);
        if (e.contains("sweep_pairs")) {
            cfg.eval.sweep_pairs.clear();
            for (const auto& p : e.at("sweep_pairs")) {
                if (!p.is_array() || p.size() != 2)
                    throw ConfigError("sweep_pairs entries must be [kernel, stride] pairs");
                cfg.eval.sweep_pairs.emplace_back(p[0].get<std::size_t>(), p[1].get<std::size_t>());
            }
        }
        read(e, "adapter_scales", cfg.eval.adapter_scales);
        read(e, "season_length", cfg.eval.season_length);
        read(e, "split", cfg.eval.split);
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return from_json(j);
}

json RunConfig::to_json() const {
    json j;
    j["backbone"] = {{"n_layers", backbone.n_layers},
                     {"d_model", backbone.d_model},
                     {"n_heads", backbone.n_heads},
                     {"vocab_size", backbone.vocab_size},
                     {"ffn_ratio", backbone.ffn_ratio}};
    j["adapter"] = {{"scale", adapter.scale}, {"input_norm", adapter.input_norm}};
    j["compressor"] = {{"kernel", compressor.kernel},
                       {"stride", compressor.stride},
                       {"padding", compressor.padding},
                       {"c_out", compressor.c_out}};
    j["encoder"] = {{"kind", encoder_kind_name(encoder.kind)}, {"patch", encoder.patch},
                    {"frame", encoder.frame},                  {"hop", encoder.hop},
                    {"channels", encoder.channels},            {"blocks", encoder.blocks},
                    {"path", encoder.path},                    {"trainable", encoder.trainable}};
    j["phase1"] = phase_to_json(phase1);
    j["phase2"] = phase_to_json(phase2);
    j["data"] = {{"task", data.task},
                 {"path", data.path},
                 {"series_csv", data.series_csv},
                 {"grid", data.grid},
                 {"vocab", data.vocab},
                 {"n_train", data.n_train},
                 {"n_eval", data.n_eval},
                 {"lookback", data.lookback},
                 {"horizon", data.horizon},
                 {"n_series", data.n_series},
                 {"n_components", data.n_components},
                 {"noise_sigma", data.noise_sigma},
                 {"store_features", data.store_features}};
    json pairs = json::array();
    for (const auto& [k, s] : eval.sweep_pairs) pairs.push_back(json::array({k, s}));
    j["eval"] = {{"bench_lengths", eval.bench_lengths},
                 {"bench_trials", eval.bench_trials},
                 {"sweep_pairs", pairs},
                 {"adapter_scales", eval.adapter_scales},
                 {"season_length", eval.season_length},
                 {"split", eval.split}};
    return j;
}

std::uint64_t RunConfig::config_hash() const {
    const std::string dump = to_json().dump();
    return fnv1a(dump.data(), dump.size());
}

void RunConfig::validate() const {
    backbone.validate();
    if (adapter.scale != 2 && adapter.scale != 4 && adapter.scale != 8)
        throw ConfigError("adapter scale must be 2, 4 or 8");
    compressor.validate();
    phase1.validate(encoder.trainable);
    phase2.validate(encoder.trainable);
    if (phase1.phase != PhaseConfig::Id::I || phase2.phase != PhaseConfig::Id::II)
        throw ConfigError("phase ids are fixed");
    if (data.task != "caption_copy" && data.task != "forecast")
        throw ConfigError("unknown data task: " + data.task);
    if (eval.split != "fresh" && eval.split != "train")
        throw ConfigError("eval split must be \"fresh\" or \"train\"");
    if (data.task == "caption_copy" && data.vocab != backbone.vocab_size)
        throw ConfigError("data vocab must match backbone vocab_size");
}

}  // namespace modrwkv
