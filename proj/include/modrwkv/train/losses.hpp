#pragma once

#include <vector>

#include "modrwkv/core/tape.hpp"

namespace modrwkv {

// Mean next-token cross-entropy over masked positions. `targets[i]` is the
// token occupying fused position i and `mask[i]` marks answer tokens; each
// masked token is scored against logits at position i-1 (shift-by-one
// alignment). Unmasked positions contribute nothing. Throws DomainError when
// the mask selects nothing (or position 0, which has no predictor).
Var loss_lm(const Var& logits, const std::vector<int>& targets, const std::vector<bool>& mask);

// Mean squared error between equal-length vectors.
Var loss_mse(const Var& pred, const Var& target);

// Fraction of masked tokens whose shift-by-one argmax prediction is correct.
double token_accuracy(const Tensor& logits, const std::vector<int>& targets,
                      const std::vector<bool>& mask);

// Greedy argmax over one logits row.
int argmax_token(const Tensor& logits_row);

}  // namespace modrwkv
