#include "modrwkv/core/fdcheck.hpp"

#include <cmath>

namespace modrwkv {

bool FdReport::passed() const {
    if (!valid) return false;
    for (const auto& p : params)
        if (!p.passed) return false;
    return true;
}

double FdReport::max_rel_err() const {
    double m = 0.0;
    for (const auto& p : params) m = std::max(m, p.max_rel_err);
    return m;
}

FdReport finite_difference_check(const std::function<double(bool)>& f,
                                 const std::vector<Parameter*>& params, double h, double tol) {
    if (h <= 0.0) throw DomainError("finite difference step must be positive");
    FdReport report;
    report.tol = tol;

    const double probe0 = f(false);
    const double probe1 = f(false);
    if (!(probe0 == probe1)) {
        report.valid = false;
        report.invalid_reason = "objective not deterministic across probe calls (" +
                                std::to_string(probe0) + " vs " + std::to_string(probe1) + ")";
        return report;
    }

    for (Parameter* p : params) p->zero_grad();
    f(true);  // fills analytic gradients

    for (Parameter* p : params) {
        FdParamResult r;
        r.name = p->name;
        for (std::size_t i = 0; i < p->value.numel(); ++i) {
            const double saved = p->value[i];

            KinkMonitor::arm_record();
            p->value[i] = saved + h;
            const double fp = f(false);
            KinkMonitor::arm_compare();
            p->value[i] = saved - h;
            const double fm = f(false);
            const bool kink = KinkMonitor::crossed();
            KinkMonitor::disarm();
            p->value[i] = saved;

            if (kink) {
                ++r.kink_elements;
                continue;
            }
            const double fd = (fp - fm) / (2.0 * h);
            const double an = p->grad[i];
            const double denom = std::max({std::abs(an), std::abs(fd), 1e-6});
            const double rel = std::abs(an - fd) / denom;
            if (rel > r.max_rel_err) {
                r.max_rel_err = rel;
                r.worst_index = i;
            }
        }
        r.passed = r.max_rel_err <= tol;
        report.params.push_back(std::move(r));
    }
    return report;
}

}  // namespace modrwkv
