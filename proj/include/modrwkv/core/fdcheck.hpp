#pragma once

#include <functional>
#include <string>
#include <vector>

#include "modrwkv/core/param.hpp"

namespace modrwkv {

struct FdParamResult {
    std::string name;
    double max_rel_err = 0.0;
    std::size_t worst_index = 0;
    std::size_t kink_elements = 0;  // probes that stepped across a relu kink
    bool passed = true;             // over non-kink elements only
};

struct FdReport {
    bool valid = true;  // false when f proved non-deterministic between probes
    std::string invalid_reason;
    double tol = 0.0;
    std::vector<FdParamResult> params;

    bool passed() const;
    double max_rel_err() const;
};

// Central-difference check of analytic gradients. `f(record)` evaluates the
// scalar objective; when `record` is true it must also accumulate gradients
// into the checked parameters (which are zeroed beforehand). Probes that move
// a relu input across its kink are excluded from the failure count and
// reported per parameter.
FdReport finite_difference_check(const std::function<double(bool record)>& f,
                                 const std::vector<Parameter*>& params, double h, double tol);

}  // namespace modrwkv
