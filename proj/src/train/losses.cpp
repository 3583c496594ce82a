#include "modrwkv/train/losses.hpp"

#include <algorithm>
#include <cmath>

namespace modrwkv {

Var loss_lm(const Var& logits, const std::vector<int>& targets, const std::vector<bool>& mask) {
    const std::size_t Lf = logits.shape()[0];
    const std::size_t V = logits.shape()[1];
    if (targets.size() != Lf || mask.size() != Lf)
        throw ShapeError("targets/mask length must match the fused sequence length");

    std::vector<std::size_t> positions;
    for (std::size_t i = 0; i < Lf; ++i)
        if (mask[i]) {
            if (i == 0) throw DomainError("masked token at position 0 has no predictor");
            positions.push_back(i);
        }
    if (positions.empty()) throw DomainError("loss mask selects no positions");

    Var total;
    bool first = true;
    for (std::size_t i : positions) {
        const int target = targets[i];
        if (target < 0 || static_cast<std::size_t>(target) >= V)
            throw DomainError("target token " + std::to_string(target) + " outside vocab");
        Var lrow = row(logits, i - 1);
        // stabilized log-sum-exp; the max is detached, which leaves the
        // softmax gradient unchanged
        double mval = lrow.val()[0];
        for (std::size_t j = 1; j < V; ++j) mval = std::max(mval, lrow.val()[j]);
        Var shifted = add_const(lrow, -mval);
        Var lse = log(reduce_sum(exp(shifted)));
        Var ce = sub(lse, slice(shifted, static_cast<std::size_t>(target), 1));
        total = first ? ce : add(total, ce);
        first = false;
    }
    return scale(total, 1.0 / static_cast<double>(positions.size()));
}

Var loss_mse(const Var& pred, const Var& target) {
    if (pred.shape() != target.shape())
        throw ShapeError("loss_mse length mismatch: " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
    Var diff = sub(pred, target);
    return reduce_mean(mul(diff, diff));
}

double token_accuracy(const Tensor& logits, const std::vector<int>& targets,
                      const std::vector<bool>& mask) {
    const std::size_t Lf = logits.dim(0);
    const std::size_t V = logits.dim(1);
    std::size_t correct = 0, total = 0;
    for (std::size_t i = 1; i < Lf; ++i) {
        if (!mask[i]) continue;
        std::size_t best = 0;
        for (std::size_t j = 1; j < V; ++j)
            if (logits.at(i - 1, j) > logits.at(i - 1, best)) best = j;
        if (static_cast<int>(best) == targets[i]) ++correct;
        ++total;
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

int argmax_token(const Tensor& logits_row) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits_row.numel(); ++i)
        if (logits_row[i] > logits_row[best]) best = i;
    return static_cast<int>(best);
}

}  // namespace modrwkv
