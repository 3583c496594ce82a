#include "modrwkv/train/schedule.hpp"

#include <cmath>

#include "modrwkv/core/errors.hpp"

namespace modrwkv {

std::size_t PhaseConfig::decay_start() const {
    const auto span = static_cast<std::size_t>(std::llround(decay_frac * static_cast<double>(steps)));
    return steps > span ? steps - span : 0;
}

void PhaseConfig::validate(bool encoder_trainable) const {
    if (steps == 0) throw ConfigError("phase must run at least one step");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (decay_frac < 0.0 || decay_frac > 1.0) throw ConfigError("decay_frac must lie in [0,1]");
    if (lr_start < 0.0 || lr_end < 0.0) throw ConfigError("learning rates must be non-negative");
    if (warmup_steps > decay_start())
        throw ConfigError("warmup (" + std::to_string(warmup_steps) +
                          " steps) must end before the decay window at step " +
                          std::to_string(decay_start()));
    for (const auto& g : trainable_groups) {
        if (phase == Id::I && (g == "backbone" || g == "encoder"))
            throw ConfigError("phase I must not train group \"" + g + "\"");
        if (phase == Id::II && g == "encoder" && !encoder_trainable)
            throw ConfigError("phase II trains the encoder only with encoder.trainable set");
    }
}

double lr_schedule(std::size_t step, const PhaseConfig& cfg) {
    if (step >= cfg.steps)
        throw ContractError("schedule step " + std::to_string(step) + " outside phase of " +
                            std::to_string(cfg.steps) + " steps");
    if (step < cfg.warmup_steps)
        return cfg.lr_start * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
    const std::size_t ds = cfg.decay_start();
    if (step < ds) return cfg.lr_start;
    const std::size_t last = cfg.steps - 1;
    if (step == last || last == ds) return cfg.lr_end;  // exact endpoint
    const double frac = static_cast<double>(step - ds) / static_cast<double>(last - ds);
    return cfg.lr_start + (cfg.lr_end - cfg.lr_start) * frac;
}

}  // namespace modrwkv
