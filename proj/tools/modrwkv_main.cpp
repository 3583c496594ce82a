#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "modrwkv/eval/bench.hpp"
#include "modrwkv/eval/evaluate.hpp"
#include "modrwkv/eval/metrics.hpp"
#include "modrwkv/version.hpp"

namespace {

using namespace modrwkv;
using nlohmann::json;

struct GlobalOpts {
    std::string config_path;
    std::uint64_t seed = 42;
    std::string out_dir = "out";
    bool quiet = false;
};

RunConfig load_config(const GlobalOpts& g) {
    if (g.config_path.empty()) return RunConfig::defaults();
    return RunConfig::from_file(g.config_path);
}

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_manifest(const GlobalOpts& g, const RunConfig& cfg, const std::string& command,
                    const std::vector<std::string>& argv) {
    std::filesystem::create_directories(g.out_dir);
    json m;
    m["tool"] = "modrwkv";
    m["version"] = kVersion;
    m["command"] = command;
    m["seed"] = g.seed;
    m["config_hash"] = hex64(cfg.config_hash());
    m["config_path"] = g.config_path;
    m["out_dir"] = g.out_dir;
    m["args"] = argv;
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    m["timestamp"] = buf;
    std::ofstream out(g.out_dir + "/manifest.json", std::ios::trunc);
    out << m.dump(2) << "\n";
}

void emit(const GlobalOpts& g, const std::string& text) {
    if (!g.quiet) std::cout << text;
}

void save_table(const GlobalOpts& g, const Table& t, const std::string& stem) {
    write_text_file(g.out_dir + "/" + stem + ".txt", t.to_text());
    write_text_file(g.out_dir + "/" + stem + ".csv", t.to_csv());
}

int cmd_gen_data(const GlobalOpts& g, const RunConfig& cfg) {
    std::filesystem::create_directories(g.out_dir);
    Dataset train = build_dataset(cfg, g.seed, false);
    Dataset eval_data = build_dataset(cfg, g.seed, true);
    if (cfg.data.store_features && cfg.data.task == "caption_copy") {
        // store patch features as MFEA files referenced from the JSONL
        std::size_t idx = 0;
        auto externalize = [&](Dataset& ds, const std::string& tag) {
            for (auto& s : ds) {
                FeatureSequence fs = encode_image_patches(s.image, cfg.encoder.patch);
                fs.modality = Modality::precomputed;
                const std::string name = "feat_" + tag + "_" + std::to_string(idx++) + ".mfea";
                write_mfea(fs, g.out_dir + "/" + name);
                s.feature_file = name;
                s.image = Tensor();
                s.modality = Modality::precomputed;
            }
        };
        externalize(train, "train");
        externalize(eval_data, "eval");
    }
    save_dataset(train, g.out_dir + "/train.jsonl");
    save_dataset(eval_data, g.out_dir + "/eval.jsonl");
    emit(g, "wrote " + std::to_string(train.size()) + " train / " +
                std::to_string(eval_data.size()) + " eval samples to " + g.out_dir + "\n");
    return 0;
}

int cmd_train(const GlobalOpts& g, const RunConfig& cfg, const std::string& resume) {
    ModelBundle model = build_model(cfg, g.seed);
    TrainerState ts;
    TrainerState* resume_ptr = nullptr;
    if (!resume.empty()) {
        RestoredModel restored = model_from_checkpoint(resume);
        model = std::move(restored.bundle);
        ts.data_rng = RngStream::from_state(restored.extra.rng);
        ts.optim = std::move(restored.extra.optim);
        ts.progress = restored.extra.progress;
        resume_ptr = &ts;
    }
    Dataset train = build_dataset(model.cfg, model.master_seed, false);
    TrainResult result = run_training(model, train, g.out_dir, g.quiet, resume_ptr);

    Dataset eval_data = model.cfg.eval.split == "train"
                            ? train
                            : build_dataset(model.cfg, model.master_seed, true);
    EvalReport rep = evaluate_task(model, eval_data);
    Table t = rep.to_table();
    save_table(g, t, "train_eval");
    emit(g, t.to_text());
    emit(g, "final checkpoint: " + result.final_checkpoint + "\n");
    return 0;
}

int cmd_eval(const GlobalOpts& g, const RunConfig& cfg, const std::string& checkpoint,
             const std::string& refs_path, const std::string& hyps_path) {
    if (!refs_path.empty() || !hyps_path.empty()) {
        // transcript mode: WER/CER between two line-aligned text files
        auto read_lines = [](const std::string& path) {
            std::ifstream in(path);
            if (!in) throw FormatError("cannot open " + path);
            std::vector<std::string> lines;
            std::string line;
            while (std::getline(in, line)) lines.push_back(line);
            return lines;
        };
        const auto refs = read_lines(refs_path);
        const auto hyps = read_lines(hyps_path);
        Table t;
        t.title = "transcript error rates";
        t.headers = {"metric", "value"};
        t.add_row({"wer_percent", format_double(word_error_rate(refs, hyps, ErrorUnit::word))});
        t.add_row({"cer_percent", format_double(word_error_rate(refs, hyps, ErrorUnit::chr))});
        save_table(g, t, "eval");
        emit(g, t.to_text());
        return 0;
    }

    ModelBundle model = [&] {
        if (checkpoint.empty()) return build_model(cfg, g.seed);
        return model_from_checkpoint(checkpoint).bundle;
    }();
    Dataset eval_data = model.cfg.eval.split == "train"
                            ? build_dataset(model.cfg, model.master_seed, false)
                            : build_dataset(model.cfg, model.master_seed, true);
    EvalReport rep = evaluate_task(model, eval_data);
    Table t = rep.to_table();
    save_table(g, t, "eval");
    std::string breakdown;
    for (const auto& line : rep.per_sample) breakdown += line + "\n";
    write_text_file(g.out_dir + "/eval_per_sample.txt", breakdown);
    emit(g, t.to_text());
    return 0;
}

int cmd_bench(const GlobalOpts& g, const RunConfig& cfg, const std::string& checkpoint,
              bool fp32) {
    ModelBundle model = [&] {
        if (checkpoint.empty()) return build_model(cfg, g.seed);
        return model_from_checkpoint(checkpoint).bundle;
    }();
    auto records = bench_inference(model, model.cfg.eval.bench_lengths,
                                   model.cfg.eval.bench_trials, fp32);
    Table t = bench_table(records);
    save_table(g, t, "bench");
    write_text_file(g.out_dir + "/bench_plot.csv", bench_csv(records));
    emit(g, t.to_text());
    return 0;
}

int cmd_sweep(const GlobalOpts& g, const RunConfig& cfg) {
    auto rows = compress_sweep(cfg, g.seed, cfg.eval.sweep_pairs, g.quiet);
    Table t = sweep_table(rows);
    save_table(g, t, "sweep");
    emit(g, t.to_text());
    return 0;
}

int cmd_sweep_adapter(const GlobalOpts& g, const RunConfig& cfg) {
    auto rows = sweep_adapter(cfg, g.seed, cfg.eval.adapter_scales, g.quiet);
    Table t = adapter_table(rows);
    save_table(g, t, "sweep_adapter");
    emit(g, t.to_text());
    return 0;
}

int cmd_inspect(const GlobalOpts& g, const std::string& checkpoint) {
    json header = inspect_checkpoint(checkpoint);
    Table t;
    t.title = "checkpoint " + checkpoint;
    t.headers = {"tensor", "shape", "bytes"};
    std::size_t total_elems = 0;
    for (const auto& entry : header.at("tensors")) {
        std::string shape = "[";
        bool first = true;
        std::size_t elems = 1;
        for (const auto& d : entry.at("shape")) {
            if (!first) shape += "x";
            shape += std::to_string(d.get<std::size_t>());
            elems *= d.get<std::size_t>();
            first = false;
        }
        shape += "]";
        total_elems += elems;
        t.add_row({entry.at("name").get<std::string>(), shape,
                   std::to_string(entry.at("bytes").get<std::size_t>())});
    }
    emit(g, t.to_text());
    emit(g, "total elements: " + std::to_string(total_elems) + "\n");
    emit(g, "progress: " + header.at("progress").at("phase").get<std::string>() + " step " +
                std::to_string(header.at("progress").at("step").get<std::size_t>()) + "\n");
    write_text_file(g.out_dir + "/inspect.txt", t.to_text());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"modrwkv: toy-scale multimodal recurrent LM pipeline"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "run config JSON");
    app.add_option("--seed", g.seed, "master seed");
    app.add_option("--out", g.out_dir, "output directory");
    app.add_flag("--quiet", g.quiet, "suppress stdout tables");

    auto* gen = app.add_subcommand("gen-data", "generate synthetic datasets");
    auto* train = app.add_subcommand("train", "run phase I then phase II");
    std::string resume;
    train->add_option("--resume", resume, "resume from checkpoint");
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a model or transcript pair");
    std::string checkpoint, refs_path, hyps_path;
    eval_cmd->add_option("--checkpoint", checkpoint, "model checkpoint");
    eval_cmd->add_option("--refs", refs_path, "reference transcript file");
    eval_cmd->add_option("--hyps", hyps_path, "hypothesis transcript file");
    auto* bench = app.add_subcommand("bench", "streaming inference benchmark");
    std::string bench_checkpoint;
    bool fp32 = false;
    bench->add_option("--checkpoint", bench_checkpoint, "model checkpoint");
    bench->add_flag("--fp32", fp32, "single-precision decode kernel");
    auto* sweep = app.add_subcommand("sweep", "conv1d compression sweep");
    auto* sweep_ad = app.add_subcommand("sweep-adapter", "adapter scaling sweep");
    auto* inspect = app.add_subcommand("inspect", "checkpoint summary");
    std::string inspect_path;
    inspect->add_option("checkpoint", inspect_path, "checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        RunConfig cfg = load_config(g);
        const std::string command = app.get_subcommands().front()->get_name();
        write_manifest(g, cfg, command, args);
        if (gen->parsed()) return cmd_gen_data(g, cfg);
        if (train->parsed()) return cmd_train(g, cfg, resume);
        if (eval_cmd->parsed()) return cmd_eval(g, cfg, checkpoint, refs_path, hyps_path);
        if (bench->parsed()) return cmd_bench(g, cfg, bench_checkpoint, fp32);
        if (sweep->parsed()) return cmd_sweep(g, cfg);
        if (sweep_ad->parsed()) return cmd_sweep_adapter(g, cfg);
        if (inspect->parsed()) return cmd_inspect(g, inspect_path);
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 1;
    } catch (const DomainError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
