#pragma once

#include <string>
#include <vector>

#include "modrwkv/backbone/backbone.hpp"
#include "modrwkv/train/checkpoint.hpp"
#include "modrwkv/train/runconfig.hpp"
#include "modrwkv/train/tasks.hpp"

namespace modrwkv {

// A built model: resolved configs plus the parameter table. Component
// initialization draws from fixed-order splits of the master seed, so e.g.
// changing the compressor never perturbs backbone weights.
struct ModelBundle {
    RunConfig cfg;
    ParameterStore params;
    AdapterConfig adapter;        // resolved d_in/d_out
    CompressorConfig compressor;  // resolved channels
    std::uint64_t master_seed = 0;

    Backbone make_backbone() { return Backbone(params, cfg.backbone); }
};

// Split indices of the master seed (fixed contract).
enum class SeedSlot : int {
    backbone = 0,
    adapter = 1,
    compressor = 2,
    encoder = 3,
    head = 4,
    train_data = 5,
    eval_data = 6,
    trainer = 7,
};
RngStream component_stream(std::uint64_t master_seed, SeedSlot slot);

ModelBundle build_model(const RunConfig& cfg, std::uint64_t master_seed);

// Rebuilds a bundle from a checkpoint (parameters, config, seed) and returns
// the stored training state alongside.
struct RestoredModel {
    ModelBundle bundle;
    CheckpointExtra extra;
};
RestoredModel model_from_checkpoint(const std::string& path);

// Deterministic dataset for the configured task; eval_split selects the
// held-out generator stream.
Dataset build_dataset(const RunConfig& cfg, std::uint64_t master_seed, bool eval_split);

// Loads MFEA payloads of precomputed samples into memory.
void materialize_features(Dataset& ds, const std::string& base_dir = "");

struct SampleForward {
    Var loss;
    Tensor logits;  // caption: [Lf×V] values
    std::vector<int> targets;
    std::vector<bool> mask;
    Tensor prediction;  // forecast: [h] values
};

// encode → compress → input-norm → adapter for one sample's modality stream.
Var modality_embeddings(ModelBundle& model, const Sample& sample, Tape* tape);

// Runs the full pipeline (encode → compress → adapt → fuse → trunk → loss)
// for one sample; records on `tape` when given.
SampleForward forward_sample(ModelBundle& model, const Sample& sample, Tape* tape);

struct StepRecord {
    std::size_t step;
    double lr;
    double loss;
};

struct PhaseLog {
    std::vector<StepRecord> records;
    double first_loss = 0.0;
    double final_loss = 0.0;
};

struct TrainerState {
    RngStream data_rng{0};
    OptimState optim;
    TrainProgress progress;
};

// Runs steps [start_step, min(steps, stop_step)) of one phase. Parameters
// outside the phase's trainable groups are bit-identical afterwards. NaN
// losses abort with a reference to the last good checkpoint. stop_step allows
// interrupting mid-phase (for checkpoint/resume); the schedule always sees
// the full phase length.
PhaseLog train_phase(ModelBundle& model, const Dataset& data, const PhaseConfig& phase,
                     TrainerState& ts, std::size_t start_step = 0, const std::string& out_dir = "",
                     bool quiet = true, std::size_t stop_step = static_cast<std::size_t>(-1));

struct TrainResult {
    PhaseLog phase1, phase2;
    std::string final_checkpoint;  // empty when no out_dir given
};

// Phase I then Phase II, with checkpoints at phase boundaries when out_dir is
// set. Pass a restored TrainerState to resume mid-run.
TrainResult run_training(ModelBundle& model, const Dataset& train_data, const std::string& out_dir,
                         bool quiet, TrainerState* resume = nullptr);

void save_model_checkpoint(ModelBundle& model, const TrainerState& ts, const std::string& path);

}  // namespace modrwkv
