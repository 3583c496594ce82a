#include "modrwkv/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "modrwkv/pipeline/fusion.hpp"
#include "modrwkv/train/losses.hpp"

namespace modrwkv {

RngStream component_stream(std::uint64_t master_seed, SeedSlot slot) {
    RngStream root(master_seed);
    RngStream child(0);
    for (int i = 0; i <= static_cast<int>(slot); ++i) child = root.split();
    return child;
}

namespace {

std::size_t resolve_feature_dim(const RunConfig& cfg) {
    if (cfg.encoder.kind == EncoderSpec::Kind::precomputed) {
        if (cfg.encoder.channels == 0)
            throw ConfigError("precomputed encoder needs `channels` set to the feature width");
        return cfg.encoder.channels;
    }
    return cfg.encoder.feature_dim(1);
}

}  // namespace

ModelBundle build_model(const RunConfig& cfg, std::uint64_t master_seed) {
    cfg.validate();
    ModelBundle m;
    m.cfg = cfg;
    m.master_seed = master_seed;

    const std::size_t feat_dim = resolve_feature_dim(cfg);
    m.compressor = cfg.compressor;
    m.compressor.c_in = feat_dim;
    if (!m.compressor.passthrough() && m.compressor.c_out == 0) m.compressor.c_out = feat_dim;

    m.adapter = cfg.adapter;
    m.adapter.d_in = m.compressor.passthrough() ? feat_dim : m.compressor.c_out;
    m.adapter.d_out = cfg.backbone.d_model;

    {
        RngStream rng = component_stream(master_seed, SeedSlot::backbone);
        Backbone::init_weights(m.params, cfg.backbone, rng);
    }
    {
        RngStream rng = component_stream(master_seed, SeedSlot::adapter);
        init_adapter_params(m.params, m.adapter, rng);
    }
    {
        RngStream rng = component_stream(master_seed, SeedSlot::compressor);
        init_compressor_params(m.params, m.compressor, rng);
    }
    {
        RngStream rng = component_stream(master_seed, SeedSlot::encoder);
        init_encoder_params(m.params, cfg.encoder, rng);
    }
    if (cfg.data.task == "forecast") {
        RngStream rng = component_stream(master_seed, SeedSlot::head);
        const std::size_t d = cfg.backbone.d_model, h = cfg.data.horizon;
        const double std = std::sqrt(2.0 / static_cast<double>(d + h));
        Tensor w({d, h});
        for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.normal(0.0, std);
        m.params.add("head.weight", std::move(w));
        m.params.add("head.bias", Tensor::zeros({h}));
    }
    return m;
}

RestoredModel model_from_checkpoint(const std::string& path) {
    LoadedCheckpoint ck = load_checkpoint(path);
    RestoredModel out;
    out.bundle.cfg = RunConfig::from_json(ck.extra.config.at("run"));
    out.bundle.master_seed = ck.extra.config.at("master_seed").get<std::uint64_t>();
    out.bundle.params = std::move(ck.params);

    const std::size_t feat_dim = resolve_feature_dim(out.bundle.cfg);
    out.bundle.compressor = out.bundle.cfg.compressor;
    out.bundle.compressor.c_in = feat_dim;
    if (!out.bundle.compressor.passthrough() && out.bundle.compressor.c_out == 0)
        out.bundle.compressor.c_out = feat_dim;
    out.bundle.adapter = out.bundle.cfg.adapter;
    out.bundle.adapter.d_in =
        out.bundle.compressor.passthrough() ? feat_dim : out.bundle.compressor.c_out;
    out.bundle.adapter.d_out = out.bundle.cfg.backbone.d_model;

    out.extra = std::move(ck.extra);
    return out;
}

Dataset build_dataset(const RunConfig& cfg, std::uint64_t master_seed, bool eval_split) {
    if (!cfg.data.path.empty()) {
        Dataset ds = load_dataset(cfg.data.path);
        materialize_features(ds, std::filesystem::path(cfg.data.path).parent_path().string());
        return ds;
    }
    RngStream rng =
        component_stream(master_seed, eval_split ? SeedSlot::eval_data : SeedSlot::train_data);
    const std::size_t n = eval_split ? cfg.data.n_eval : cfg.data.n_train;
    if (cfg.data.task == "caption_copy")
        return gen_caption_copy(rng, cfg.data.grid, cfg.data.vocab, n, cfg.encoder.patch);
    if (!cfg.data.series_csv.empty()) {
        auto series = load_series_csv(cfg.data.series_csv);
        return windows_from_series(series, cfg.data.lookback, cfg.data.horizon);
    }
    const std::size_t series_per_split = std::max<std::size_t>(1, cfg.data.n_series);
    return gen_forecast(rng, eval_split ? std::max<std::size_t>(1, series_per_split / 4)
                                        : series_per_split,
                        cfg.data.lookback, cfg.data.horizon, cfg.data.n_components,
                        cfg.data.noise_sigma);
}

void materialize_features(Dataset& ds, const std::string& base_dir) {
    for (auto& s : ds) {
        if (s.feature_file.empty() || s.features.numel() != 0) continue;
        std::filesystem::path p(s.feature_file);
        if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
        FeatureSequence fs = load_precomputed(p.string());
        s.features = std::move(fs.features);
        s.modality = Modality::precomputed;
    }
}

namespace {

Var bound_param(ParameterStore& store, const std::string& name, Tape* tape) {
    Parameter& p = store.at(name);
    return tape ? tape->leaf(p) : Var::constant(p.value);
}

}  // namespace

Var modality_embeddings(ModelBundle& model, const Sample& sample, Tape* tape) {
    const RunConfig& cfg = model.cfg;
    Var feats;
    switch (cfg.encoder.kind) {
        case EncoderSpec::Kind::image_patch:
            feats = Var::constant(encode_image_patches(sample.image, cfg.encoder.patch).features);
            break;
        case EncoderSpec::Kind::audio_frame: {
            Tensor wave({sample.series.size()}, sample.series);
            feats = Var::constant(
                encode_audio_frames(wave, cfg.encoder.frame, cfg.encoder.hop).features);
            break;
        }
        case EncoderSpec::Kind::ts_pointwise_dilated: {
            Tensor lookback({cfg.data.lookback},
                            std::vector<double>(sample.series.begin(),
                                                sample.series.begin() + cfg.data.lookback));
            feats = encode_ts_pointwise(Var::constant(lookback), cfg.encoder, model.params, tape);
            break;
        }
        case EncoderSpec::Kind::ts_patch: {
            Tensor lookback({cfg.data.lookback},
                            std::vector<double>(sample.series.begin(),
                                                sample.series.begin() + cfg.data.lookback));
            feats = Var::constant(encode_ts_patch(lookback, cfg.encoder.patch).features);
            break;
        }
        case EncoderSpec::Kind::precomputed:
            if (sample.features.numel() == 0)
                throw StateError("precomputed sample has no materialized features");
            feats = Var::constant(sample.features);
            break;
    }

    if (!model.compressor.passthrough()) {
        Var w = bound_param(model.params, "compressor.weight", tape);
        Var b = bound_param(model.params, "compressor.bias", tape);
        feats = conv1d_compress(feats, w, b, model.compressor);
    }
    if (model.adapter.input_norm) {
        Var ns = bound_param(model.params, "adapter.norm.scale", tape);
        Var no = bound_param(model.params, "adapter.norm.offset", tape);
        feats = rowwise_layer_norm(feats, ns, no);
    }
    Var w1 = bound_param(model.params, "adapter.linear1.weight", tape);
    Var b1 = bound_param(model.params, "adapter.linear1.bias", tape);
    Var w2 = bound_param(model.params, "adapter.linear2.weight", tape);
    Var b2 = bound_param(model.params, "adapter.linear2.bias", tape);
    return adapt(feats, w1, b1, w2, b2);
}

SampleForward forward_sample(ModelBundle& model, const Sample& sample, Tape* tape) {
    SampleForward out;
    Backbone bb = model.make_backbone();
    BoundModel bm = bb.bind(tape);
    Var mod_emb = modality_embeddings(model, sample, tape);

    if (model.cfg.data.task == "caption_copy" || !sample.answer.empty()) {
        std::vector<int> text = sample.prompt;
        text.insert(text.end(), sample.answer.begin(), sample.answer.end());
        Var text_emb = bb.embed_tokens(bm, text);
        FuseLayout layout{sample.prompt.size(), text.size()};
        Fused fused = fuse(mod_emb, text_emb, layout);

        auto trunk = bb.run_trunk(bm, fused.embeddings);
        Var logits = matmul(trunk.hidden, bm.head);

        out.targets.assign(fused.modality_len, 0);
        out.targets.insert(out.targets.end(), text.begin(), text.end());
        out.mask = fused.loss_mask;
        out.loss = loss_lm(logits, out.targets, out.mask);
        out.logits = logits.val();
        return out;
    }

    // forecast: trunk over modality tokens only, linear head off the final position
    const std::size_t L = mod_emb.shape()[0];
    auto trunk = bb.run_trunk(bm, mod_emb);
    Var h_last = row(trunk.hidden, L - 1);
    Var hw = bound_param(model.params, "head.weight", tape);
    Var hb = bound_param(model.params, "head.bias", tape);
    const std::size_t d = model.cfg.backbone.d_model;
    Var pred = add(reshape(matmul(reshape(h_last, {1, d}), hw), {model.cfg.data.horizon}), hb);

    std::vector<double> horizon(sample.series.begin() + model.cfg.data.lookback,
                                sample.series.end());
    Var target = Var::constant(Tensor({horizon.size()}, horizon));
    out.loss = loss_mse(pred, target);
    out.prediction = pred.val();
    return out;
}

PhaseLog train_phase(ModelBundle& model, const Dataset& data, const PhaseConfig& phase,
                     TrainerState& ts, std::size_t start_step, const std::string& out_dir,
                     bool quiet, std::size_t stop_step) {
    if (data.empty()) throw ConfigError("training dataset is empty");
    phase.validate(model.cfg.encoder.trainable);
    model.params.set_trainable_by_prefix(phase.trainable_groups);

    const std::string phase_name = phase.phase == PhaseConfig::Id::I ? "phase1" : "phase2";
    const std::size_t end_step = std::min(stop_step, phase.steps);
    std::string last_good;
    PhaseLog log;
    Tape tape;
    for (std::size_t step = start_step; step < end_step; ++step) {
        const double lr = lr_schedule(step, phase);
        model.params.zero_grads();
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < phase.batch_size; ++b) {
            const auto idx = ts.data_rng.uniform_index(data.size());
            tape.reset();
            SampleForward fwd = forward_sample(model, data[idx], &tape);
            const double loss_val = fwd.loss.val().item();
            if (!std::isfinite(loss_val))
                throw TrainAbort(phase_name + " step " + std::to_string(step) +
                                     ": non-finite loss; last good checkpoint: " +
                                     (last_good.empty() ? "(none)" : last_good),
                                 last_good);
            loss_sum += loss_val;
            tape.backward(scale(fwd.loss, 1.0 / static_cast<double>(phase.batch_size)));
        }
        tape.reset();
        if (phase.clip_norm > 0.0) clip_global_norm(model.params, phase.clip_norm);
        adam_step(model.params, ts.optim, lr, phase.adam);

        const double loss_mean = loss_sum / static_cast<double>(phase.batch_size);
        log.records.push_back({step, lr, loss_mean});
        if (step == start_step) log.first_loss = loss_mean;
        log.final_loss = loss_mean;
        ts.progress.phase = phase_name;
        ts.progress.step = step + 1;

        if (!out_dir.empty() && (step + 1) % 50 == 0) {
            last_good = out_dir + "/ck_lastgood.bin";
            save_model_checkpoint(model, ts, last_good);
        }
        if (!quiet && (step % 50 == 0 || step + 1 == phase.steps))
            std::cout << phase_name << " step " << step << " lr " << lr << " loss " << loss_mean
                      << "\n";
    }
    return log;
}

void save_model_checkpoint(ModelBundle& model, const TrainerState& ts, const std::string& path) {
    CheckpointExtra extra;
    extra.config = nlohmann::json{{"run", model.cfg.to_json()}, {"master_seed", model.master_seed}};
    extra.rng = ts.data_rng.state();
    extra.has_optim = true;
    extra.optim = ts.optim;
    extra.progress = ts.progress;
    save_checkpoint(model.params, extra, path);
}

TrainResult run_training(ModelBundle& model, const Dataset& train_data, const std::string& out_dir,
                         bool quiet, TrainerState* resume) {
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
    TrainerState ts;
    if (resume) {
        ts = *resume;
    } else {
        ts.data_rng = component_stream(model.master_seed, SeedSlot::trainer);
        ts.progress = {"phase1", 0};
    }

    TrainResult result;
    if (ts.progress.phase == "init") ts.progress = {"phase1", 0};
    if (ts.progress.phase == "phase1") {
        result.phase1 =
            train_phase(model, train_data, model.cfg.phase1, ts, ts.progress.step, out_dir, quiet);
        ts.progress = {"phase2", 0};
        ts.optim = OptimState{};  // fresh moments for the second phase
        if (!out_dir.empty()) save_model_checkpoint(model, ts, out_dir + "/ck_phase1.bin");
    }
    if (ts.progress.phase == "phase2") {
        result.phase2 =
            train_phase(model, train_data, model.cfg.phase2, ts, ts.progress.step, out_dir, quiet);
        ts.progress = {"done", 0};
    }
    if (!out_dir.empty()) {
        result.final_checkpoint = out_dir + "/ck_final.bin";
        save_model_checkpoint(model, ts, result.final_checkpoint);
    }
    return result;
}

}  // namespace modrwkv
