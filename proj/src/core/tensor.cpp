#include "modrwkv/core/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

namespace modrwkv {

namespace {
std::atomic<std::size_t> g_current{0};
std::atomic<std::size_t> g_peak{0};

struct KinkState {
    enum class Mode { off, record, compare } mode = Mode::off;
    std::vector<signed char> signs;
    std::size_t cursor = 0;
    bool crossed = false;
};
thread_local KinkState g_kink;
}  // namespace

std::size_t AllocStats::current_bytes() { return g_current.load(); }
std::size_t AllocStats::peak_bytes() { return g_peak.load(); }
void AllocStats::reset_peak() { g_peak.store(g_current.load()); }

void AllocStats::on_alloc(std::size_t bytes) {
    std::size_t cur = g_current.fetch_add(bytes) + bytes;
    std::size_t peak = g_peak.load();
    while (cur > peak && !g_peak.compare_exchange_weak(peak, cur)) {
    }
}

void AllocStats::on_free(std::size_t bytes) { g_current.fetch_sub(bytes); }

void KinkMonitor::arm_record() {
    g_kink.mode = KinkState::Mode::record;
    g_kink.signs.clear();
    g_kink.cursor = 0;
    g_kink.crossed = false;
}

void KinkMonitor::arm_compare() {
    g_kink.mode = KinkState::Mode::compare;
    g_kink.cursor = 0;
    g_kink.crossed = false;
}

void KinkMonitor::disarm() { g_kink.mode = KinkState::Mode::off; }
bool KinkMonitor::crossed() { return g_kink.crossed; }

namespace {
inline void kink_observe(double x) {
    if (g_kink.mode == KinkState::Mode::off) return;
    signed char s = x > 0.0 ? 1 : (x < 0.0 ? -1 : 0);
    if (g_kink.mode == KinkState::Mode::record) {
        g_kink.signs.push_back(s);
    } else {
        if (g_kink.cursor >= g_kink.signs.size() || g_kink.signs[g_kink.cursor] != s)
            g_kink.crossed = true;
        ++g_kink.cursor;
    }
}
}  // namespace

std::string shape_str(const Tensor::Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Tensor::Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    for (std::size_t d : shape_)
        if (d == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape_));
    data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::initializer_list<double> values)
    : Tensor(std::move(shape), std::vector<double>(values)) {}

Tensor::Tensor(Shape shape, const std::vector<double>& values) : shape_(std::move(shape)) {
    if (shape_numel(shape_) != values.size())
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not fill shape " + shape_str(shape_));
    data_.assign(values.begin(), values.end());
}

Tensor Tensor::eye(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() requires a one-element tensor, got " + shape_str(shape_));
    return data_[0];
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul shape mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor c({m, n});
    // ikj order: row of c accumulated from rows of b, k ascending per output
    // element (same summation order as the naive triple loop).
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c.data() + i * n;
        const double* ai = a.data() + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = ai[kk];
            const double* bk = b.data() + kk * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bk[j];
        }
    }
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
        throw ShapeError("matmul_nt shape mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a.data() + i * k;
        double* ci = c.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b.data() + j * k;
            double acc = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) acc += ai[kk] * bj[kk];
            ci[j] = acc;
        }
    }
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0))
        throw ShapeError("matmul_tn shape mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const std::size_t m = a.dim(1), k = a.dim(0), n = b.dim(1);
    Tensor c({m, n});
    for (std::size_t kk = 0; kk < k; ++kk) {
        const double* ak = a.data() + kk * m;
        const double* bk = b.data() + kk * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = ak[i];
            double* ci = c.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bk[j];
        }
    }
    return c;
}

Tensor outer(const Tensor& u, const Tensor& v) {
    if (u.rank() != 1 || v.rank() != 1)
        throw ShapeError("outer requires 1-D operands, got " + shape_str(u.shape()) + " and " +
                         shape_str(v.shape()));
    const std::size_t d1 = u.dim(0), d2 = v.dim(0);
    Tensor y({d1, d2});
    for (std::size_t i = 0; i < d1; ++i) {
        const double ui = u[i];
        double* yi = y.data() + i * d2;
        for (std::size_t j = 0; j < d2; ++j) yi[j] = ui * v[j];
    }
    return y;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose requires a 2-D tensor, got " + shape_str(a.shape()));
    const std::size_t m = a.dim(0), n = a.dim(1);
    Tensor t({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

Tensor elementwise(Unary kind, const Tensor& x) {
    Tensor y(x.shape());
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i) {
        const double v = x[i];
        double r;
        switch (kind) {
            case Unary::relu:
                kink_observe(v);
                r = v > 0.0 ? v : 0.0;
                break;
            case Unary::sigmoid: r = 1.0 / (1.0 + std::exp(-v)); break;
            case Unary::exp: r = std::exp(v); break;
            case Unary::neg_exp_exp: r = std::exp(-std::exp(v)); break;
            case Unary::log:
                if (v <= 0.0) throw DomainError("log of non-positive value " + std::to_string(v));
                r = std::log(v);
                break;
            case Unary::tanh: r = std::tanh(v); break;
            case Unary::sqrt:
                if (v < 0.0) throw DomainError("sqrt of negative value " + std::to_string(v));
                r = std::sqrt(v);
                break;
            case Unary::neg: r = -v; break;
            default: throw StateError("unhandled unary kind");
        }
        y[i] = r;
    }
    return y;
}

namespace {
// dispatch once, then run a tight loop per kind
template <typename F>
inline Tensor ew_equal(const Tensor& a, const Tensor& b, F f) {
    Tensor y(a.shape());
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) y[i] = f(a[i], b[i]);
    return y;
}
template <typename F>
inline Tensor ew_scalar(const Tensor& a, double s, bool scalar_lhs, F f) {
    Tensor y(a.shape());
    const std::size_t n = a.numel();
    if (scalar_lhs)
        for (std::size_t i = 0; i < n; ++i) y[i] = f(s, a[i]);
    else
        for (std::size_t i = 0; i < n; ++i) y[i] = f(a[i], s);
    return y;
}
template <typename F>
inline Tensor ew_dispatch(const Tensor& a, const Tensor& b, F f) {
    if (a.same_shape(b)) return ew_equal(a, b, f);
    if (b.is_scalar()) return ew_scalar(a, b[0], false, f);
    if (a.is_scalar()) return ew_scalar(b, a[0], true, f);
    throw ShapeError("elementwise shapes incompatible (only scalar and equal-shape broadcasting): " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}
}  // namespace

Tensor elementwise(Binary kind, const Tensor& a, const Tensor& b) {
    switch (kind) {
        case Binary::add: return ew_dispatch(a, b, [](double x, double y) { return x + y; });
        case Binary::sub: return ew_dispatch(a, b, [](double x, double y) { return x - y; });
        case Binary::mul: return ew_dispatch(a, b, [](double x, double y) { return x * y; });
        case Binary::div: return ew_dispatch(a, b, [](double x, double y) { return x / y; });
    }
    throw StateError("unhandled binary kind");
}

Tensor reduce(Reduce kind, const Tensor& x, int axis, std::vector<std::size_t>* argmax_out) {
    if (x.numel() == 0) throw ShapeError("reduce of empty tensor");
    if (axis < 0) {
        // full reduction to a scalar
        if (kind == Reduce::max) {
            std::size_t best = 0;
            for (std::size_t i = 1; i < x.numel(); ++i)
                if (x[i] > x[best]) best = i;
            if (argmax_out) *argmax_out = {best};
            return Tensor::scalar(x[best]);
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < x.numel(); ++i) acc += x[i];
        if (kind == Reduce::mean) acc /= static_cast<double>(x.numel());
        return Tensor::scalar(acc);
    }
    if (static_cast<std::size_t>(axis) >= x.rank())
        throw ShapeError("reduce axis " + std::to_string(axis) + " out of range for " +
                         shape_str(x.shape()));
    const std::size_t ax = static_cast<std::size_t>(axis);
    const std::size_t extent = x.dim(ax);
    if (extent == 0) throw ShapeError("reduce over empty axis extent");
    std::size_t outer_n = 1, inner_n = 1;
    for (std::size_t i = 0; i < ax; ++i) outer_n *= x.dim(i);
    for (std::size_t i = ax + 1; i < x.rank(); ++i) inner_n *= x.dim(i);

    Tensor::Shape oshape;
    for (std::size_t i = 0; i < x.rank(); ++i)
        if (i != ax) oshape.push_back(x.dim(i));
    if (oshape.empty()) oshape = {1};
    Tensor y(oshape);
    if (argmax_out) argmax_out->assign(y.numel(), 0);

    for (std::size_t o = 0; o < outer_n; ++o) {
        for (std::size_t in = 0; in < inner_n; ++in) {
            const std::size_t base = o * extent * inner_n + in;
            if (kind == Reduce::max) {
                std::size_t best = base;
                for (std::size_t e = 1; e < extent; ++e) {
                    const std::size_t idx = base + e * inner_n;
                    if (x[idx] > x[best]) best = idx;
                }
                y[o * inner_n + in] = x[best];
                if (argmax_out) (*argmax_out)[o * inner_n + in] = best;
            } else {
                double acc = 0.0;
                for (std::size_t e = 0; e < extent; ++e) acc += x[base + e * inner_n];
                if (kind == Reduce::mean) acc /= static_cast<double>(extent);
                y[o * inner_n + in] = acc;
            }
        }
    }
    return y;
}

Tensor reshape(const Tensor& x, Tensor::Shape shape) {
    if (shape_numel(shape) != x.numel())
        throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                         " changes element count");
    Tensor y(std::move(shape));
    std::copy(x.data(), x.data() + x.numel(), y.data());
    return y;
}

Tensor row(const Tensor& x, std::size_t i) {
    if (x.rank() != 2) throw ShapeError("row() requires a 2-D tensor, got " + shape_str(x.shape()));
    if (i >= x.dim(0)) throw ShapeError("row index " + std::to_string(i) + " out of range");
    Tensor y({x.dim(1)});
    std::copy(x.data() + i * x.dim(1), x.data() + (i + 1) * x.dim(1), y.data());
    return y;
}

Tensor slice(const Tensor& x, std::size_t offset, std::size_t n) {
    if (x.rank() != 1) throw ShapeError("slice() requires a 1-D tensor, got " + shape_str(x.shape()));
    if (offset + n > x.dim(0)) throw ShapeError("slice out of range");
    Tensor y({n});
    std::copy(x.data() + offset, x.data() + offset + n, y.data());
    return y;
}

Tensor concat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat of zero parts");
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.rank() != 1) throw ShapeError("concat requires 1-D parts");
        total += p.dim(0);
    }
    Tensor y({total});
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.data(), p.data() + p.numel(), y.data() + off);
        off += p.numel();
    }
    return y;
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw ShapeError("stack_rows of zero rows");
    const std::size_t w = rows.front().dim(0);
    for (const auto& r : rows)
        if (r.rank() != 1 || r.dim(0) != w) throw ShapeError("stack_rows width mismatch");
    Tensor y({rows.size(), w});
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(rows[i].data(), rows[i].data() + w, y.data() + i * w);
    return y;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
        throw ShapeError("concat_rows width mismatch: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    Tensor y({a.dim(0) + b.dim(0), a.dim(1)});
    std::copy(a.data(), a.data() + a.numel(), y.data());
    std::copy(b.data(), b.data() + b.numel(), y.data() + a.numel());
    return y;
}

}  // namespace modrwkv
