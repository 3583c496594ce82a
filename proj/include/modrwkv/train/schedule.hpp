#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "modrwkv/train/optimizer.hpp"

namespace modrwkv {

// One training phase: which parameter groups train, for how long, and the
// warmup-stable-decay learning-rate shape. Phase I trains the adapter (and
// its input norm) with everything else frozen; Phase II additionally
// unfreezes the backbone while the encoder stays frozen unless explicitly
// made trainable.
struct PhaseConfig {
    enum class Id { I, II };
    Id phase = Id::I;
    std::vector<std::string> trainable_groups;
    double lr_start = 1e-3;
    double lr_end = 1e-4;
    std::size_t steps = 200;
    std::size_t warmup_steps = 100;
    std::size_t batch_size = 8;
    double decay_frac = 0.2;  // final fraction of steps spent decaying to lr_end
    std::uint64_t seed = 0;

    AdamConfig adam;
    double clip_norm = 1.0;  // 0 disables

    std::size_t decay_start() const;
    void validate(bool encoder_trainable) const;
};

// Warmup-stable-decay: linear 0→lr_start over warmup_steps, flat until the
// decay window, then linear to exactly lr_end at the final step.
double lr_schedule(std::size_t step, const PhaseConfig& cfg);

}  // namespace modrwkv
