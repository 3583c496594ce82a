#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "modrwkv/train/trainer.hpp"

using namespace modrwkv;

namespace {

std::string temp_dir() {
    auto p = std::filesystem::temp_directory_path() / "modrwkv_ck_tests";
    std::filesystem::create_directories(p);
    return p.string();
}

RunConfig small_config() {
    RunConfig cfg = RunConfig::defaults();
    cfg.backbone.n_layers = 1;
    cfg.backbone.d_model = 16;
    cfg.backbone.n_heads = 1;
    cfg.backbone.vocab_size = 32;
    cfg.backbone.ffn_ratio = 2;
    cfg.data.task = "caption_copy";
    cfg.data.grid = 2;
    cfg.data.vocab = 32;
    cfg.encoder.patch = 2;
    cfg.data.n_train = 6;
    cfg.data.n_eval = 2;
    cfg.phase1.steps = 6;
    cfg.phase1.warmup_steps = 1;
    cfg.phase1.batch_size = 2;
    cfg.phase2.steps = 10;
    cfg.phase2.warmup_steps = 2;
    cfg.phase2.batch_size = 2;
    return cfg;
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("checkpoint: save→load→save is byte-identical; tensors round-trip") {
    const std::string dir = temp_dir();
    RunConfig cfg = small_config();
    ModelBundle model = build_model(cfg, 1001);
    TrainerState ts;
    ts.data_rng = component_stream(1001, SeedSlot::trainer);
    ts.progress = {"phase1", 3};
    ts.optim.t = 3;

    const std::string p1 = dir + "/a.bin";
    const std::string p2 = dir + "/b.bin";
    save_model_checkpoint(model, ts, p1);

    RestoredModel restored = model_from_checkpoint(p1);
    CHECK(restored.bundle.params.hash_values() == model.params.hash_values());
    CHECK(restored.extra.progress.phase == "phase1");
    CHECK(restored.extra.progress.step == 3);
    CHECK(restored.extra.optim.t == 3);
    CHECK(restored.bundle.master_seed == 1001);

    // bit-exact tensor comparison, not just hashes
    model.params.for_each([&](const Parameter& p) {
        const Parameter& q = restored.bundle.params.at(p.name);
        REQUIRE(q.value.shape() == p.value.shape());
        for (std::size_t i = 0; i < p.value.numel(); ++i) REQUIRE(q.value[i] == p.value[i]);
    });

    TrainerState ts2;
    ts2.data_rng = RngStream::from_state(restored.extra.rng);
    ts2.progress = restored.extra.progress;
    ts2.optim = restored.extra.optim;
    save_model_checkpoint(restored.bundle, ts2, p2);
    CHECK(read_bytes(p1) == read_bytes(p2));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("checkpoint: corruption and version mismatches are explicit errors") {
    const std::string dir = temp_dir();
    RunConfig cfg = small_config();
    ModelBundle model = build_model(cfg, 1002);
    TrainerState ts;
    ts.data_rng = component_stream(1002, SeedSlot::trainer);
    const std::string path = dir + "/c.bin";
    save_model_checkpoint(model, ts, path);

    SUBCASE("flipping a payload byte trips the checksum") {
        std::string bytes = read_bytes(path);
        bytes[bytes.size() - 100] ^= 0x40;  // inside the payload
        std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
        CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("checksum"), FormatError);
    }

    SUBCASE("wrong magic is named") {
        std::string bytes = read_bytes(path);
        bytes[0] = 'X';
        std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
        CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("MRWK"), FormatError);
    }

    SUBCASE("unsupported version is reported as such") {
        std::string bytes = read_bytes(path);
        bytes[4] = 99;
        std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
        CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("unsupported"), FormatError);
    }
    std::remove(path.c_str());
}

TEST_CASE("checkpoint: resume reproduces the uninterrupted trajectory") {
    const std::string dir = temp_dir() + "/resume";
    std::filesystem::create_directories(dir);
    RunConfig cfg = small_config();

    // uninterrupted run
    ModelBundle base = build_model(cfg, 1003);
    Dataset data = build_dataset(cfg, 1003, false);
    TrainResult full = run_training(base, data, "", true);

    // interrupted: stop after phase1 + 4 steps of phase2, checkpoint, resume
    ModelBundle part = build_model(cfg, 1003);
    TrainerState ts;
    ts.data_rng = component_stream(1003, SeedSlot::trainer);
    train_phase(part, data, cfg.phase1, ts);
    ts.progress = {"phase2", 0};
    ts.optim = OptimState{};
    PhaseLog head_log = train_phase(part, data, cfg.phase2, ts, 0, "", true, /*stop_step=*/4);
    const std::string ck = dir + "/mid.bin";
    save_model_checkpoint(part, ts, ck);

    RestoredModel restored = model_from_checkpoint(ck);
    TrainerState ts2;
    ts2.data_rng = RngStream::from_state(restored.extra.rng);
    ts2.optim = restored.extra.optim;
    ts2.progress = restored.extra.progress;
    PhaseLog tail_log = train_phase(restored.bundle, data, cfg.phase2, ts2, ts2.progress.step);

    REQUIRE(head_log.records.size() + tail_log.records.size() == full.phase2.records.size());
    for (std::size_t i = 0; i < head_log.records.size(); ++i)
        CHECK(head_log.records[i].loss == full.phase2.records[i].loss);
    for (std::size_t i = 0; i < tail_log.records.size(); ++i)
        CHECK(tail_log.records[i].loss == full.phase2.records[4 + i].loss);
    CHECK(restored.bundle.params.hash_values() != 0);

    // final parameters agree bitwise
    ModelBundle fresh = build_model(cfg, 1003);
    (void)fresh;
    CHECK(restored.bundle.params.hash_values() == base.params.hash_values());
    std::filesystem::remove_all(dir);
}

TEST_CASE("inspect surfaces the tensor directory without loading payloads") {
    const std::string dir = temp_dir();
    RunConfig cfg = small_config();
    ModelBundle model = build_model(cfg, 1004);
    TrainerState ts;
    ts.data_rng = component_stream(1004, SeedSlot::trainer);
    const std::string path = dir + "/d.bin";
    save_model_checkpoint(model, ts, path);
    auto header = inspect_checkpoint(path);
    CHECK(header.at("checksum_ok").get<bool>());
    CHECK(header.at("tensors").size() >= model.params.size());
    std::remove(path.c_str());
}
