#include "modrwkv/core/tape.hpp"

#include <cmath>

namespace modrwkv {

const Tensor& Var::val() const {
    if (tape_) return tape_->value_of(node_);
    return owned_;
}

Var Tape::leaf(Parameter& p) {
    if (mode_ != Mode::recording) throw StateError("tape is frozen; reset() before recording");
    Node n;
    n.value = p.value;
    n.param = &p;
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Tensor t) {
    if (mode_ != Mode::recording) throw StateError("tape is frozen; reset() before recording");
    Node n;
    n.value = std::move(t);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

int Tape::emit(Tensor value, std::vector<int> inputs, BackwardFn fn) {
    if (mode_ != Mode::recording) throw StateError("tape is frozen; reset() before recording");
    const int self = static_cast<int>(nodes_.size());
    for (int in : inputs)
        if (in < 0 || in >= self) throw StateError("tape input id out of order");
    Node n;
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return self;
}

Tensor& Tape::grad_of(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.numel() == 0) n.grad = Tensor::zeros(n.value.shape());
    return n.grad;
}

void Tape::accumulate(int id, Tensor contribution) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.value.same_shape(contribution))
        throw ShapeError("gradient shape " + shape_str(contribution.shape()) +
                         " does not match node shape " + shape_str(n.value.shape()));
    if (n.grad.numel() == 0) {
        n.grad = std::move(contribution);
        return;
    }
    for (std::size_t i = 0; i < n.grad.numel(); ++i) n.grad[i] += contribution[i];
}

void Tape::backward(const Var& loss) {
    if (mode_ == Mode::frozen) throw StateError("backward on a frozen tape");
    if (!loss.tracked() || loss.tape() != this) throw StateError("loss was not produced on this tape");
    if (loss.val().numel() != 1)
        throw ShapeError("backward requires a scalar loss, got " + shape_str(loss.val().shape()));

    grad_of(loss.node())[0] = 1.0;
    for (int id = loss.node(); id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.numel() == 0) continue;  // not reachable from the loss
        if (n.backward) n.backward(*this, id);
    }
    for (auto& n : nodes_) {
        if (n.param && n.param->trainable && n.grad.numel() != 0) {
            Tensor& pg = n.param->grad;
            for (std::size_t i = 0; i < pg.numel(); ++i) pg[i] += n.grad[i];
        }
    }
    mode_ = Mode::frozen;
}

void Tape::reset() {
    nodes_.clear();
    mode_ = Mode::recording;
}

bool Tape::check_topological() const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        for (int in : nodes_[i].inputs)
            if (in < 0 || static_cast<std::size_t>(in) >= i) return false;
    return true;
}

namespace {

// Picks the tape shared by the tracked operands (if any) and promotes
// untracked ones to constants on it.
Tape* common_tape(std::initializer_list<const Var*> vars) {
    Tape* t = nullptr;
    for (const Var* v : vars) {
        if (!v->tracked()) continue;
        if (t && v->tape() != t) throw StateError("operands recorded on different tapes");
        t = v->tape();
    }
    return t;
}

int node_on(Tape& tape, const Var& v) {
    if (v.tracked()) return v.node();
    return tape.constant(v.val()).node();
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
    Tensor y = matmul(a.val(), b.val());
    Tape* t = common_tape({&a, &b});
    if (!t) return Var(std::move(y));
    int ia = node_on(*t, a), ib = node_on(*t, b);
    int id = t->emit(std::move(y), {ia, ib}, [ia, ib](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(self);
        tp.accumulate(ia, matmul_nt(g, tp.value_of(ib)));
        tp.accumulate(ib, matmul_tn(tp.value_of(ia), g));
    });
    return Var(t, id);
}

Var outer(const Var& u, const Var& v) {
    Tensor y = outer(u.val(), v.val());
    Tape* t = common_tape({&u, &v});
    if (!t) return Var(std::move(y));
    int iu = node_on(*t, u), iv = node_on(*t, v);
    int id = t->emit(std::move(y), {iu, iv}, [iu, iv](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(self);  // [d1×d2]
        const Tensor& uv = tp.value_of(iu);
        const Tensor& vv = tp.value_of(iv);
        const std::size_t d1 = uv.dim(0), d2 = vv.dim(0);
        Tensor du({d1}), dv({d2});
        for (std::size_t i = 0; i < d1; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d2; ++j) acc += g.at(i, j) * vv[j];
            du[i] = acc;
        }
        for (std::size_t j = 0; j < d2; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < d1; ++i) acc += g.at(i, j) * uv[i];
            dv[j] = acc;
        }
        tp.accumulate(iu, du);
        tp.accumulate(iv, dv);
    });
    return Var(t, id);
}

Var elementwise(Unary kind, const Var& x) {
    Tensor y = elementwise(kind, x.val());
    Tape* t = common_tape({&x});
    if (!t) return Var(std::move(y));
    int ix = node_on(*t, x);
    int id = t->emit(std::move(y), {ix}, [kind, ix](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(self);
        const Tensor& xv = tp.value_of(ix);
        const Tensor& yv = tp.value_of(self);
        Tensor dx(xv.shape());
        const std::size_t n = xv.numel();
        for (std::size_t i = 0; i < n; ++i) {
            double d;
            switch (kind) {
                case Unary::relu: d = xv[i] > 0.0 ? 1.0 : 0.0; break;
                case Unary::sigmoid: d = yv[i] * (1.0 - yv[i]); break;
                case Unary::exp: d = yv[i]; break;
                case Unary::neg_exp_exp: d = -std::exp(xv[i] - std::exp(xv[i])); break;
                case Unary::log: d = 1.0 / xv[i]; break;
                case Unary::tanh: d = 1.0 - yv[i] * yv[i]; break;
                case Unary::sqrt: d = 0.5 / yv[i]; break;
                case Unary::neg: d = -1.0; break;
                default: d = 0.0; break;
            }
            dx[i] = g[i] * d;
        }
        tp.accumulate(ix, dx);
    });
    return Var(t, id);
}

namespace {

// Reduces an output-shaped gradient onto an operand that may have been
// broadcast from a scalar.
Tensor fit_grad(const Tensor& g, const Tensor& operand) {
    if (g.same_shape(operand)) return g;
    // operand was a scalar broadcast over g's shape
    double acc = 0.0;
    for (std::size_t i = 0; i < g.numel(); ++i) acc += g[i];
    Tensor r(operand.shape());
    r[0] = acc;
    return r;
}

}  // namespace

Var elementwise(Binary kind, const Var& a, const Var& b) {
    Tensor y = elementwise(kind, a.val(), b.val());
    Tape* t = common_tape({&a, &b});
    if (!t) return Var(std::move(y));
    int ia = node_on(*t, a), ib = node_on(*t, b);
    int id = t->emit(std::move(y), {ia, ib}, [kind, ia, ib](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(self);
        const Tensor& av = tp.value_of(ia);
        const Tensor& bv = tp.value_of(ib);
        switch (kind) {
            case Binary::add:
                tp.accumulate(ia, fit_grad(g, av));
                tp.accumulate(ib, fit_grad(g, bv));
                break;
            case Binary::sub:
                tp.accumulate(ia, fit_grad(g, av));
                tp.accumulate(ib, fit_grad(elementwise(Unary::neg, g), bv));
                break;
            case Binary::mul:
                tp.accumulate(ia, fit_grad(elementwise(Binary::mul, g, bv), av));
                tp.accumulate(ib, fit_grad(elementwise(Binary::mul, g, av), bv));
                break;
            case Binary::div: {
                tp.accumulate(ia, fit_grad(elementwise(Binary::div, g, bv), av));
                Tensor gb = elementwise(Binary::mul, g, av);  // g*a
                Tensor b2 = elementwise(Binary::mul, bv, bv);
                gb = elementwise(Binary::div, gb, b2);
                gb = elementwise(Unary::neg, gb);
                tp.accumulate(ib, fit_grad(gb, bv));
                break;
            }
        }
    });
    return Var(t, id);
}

Var add(const Var& a, const Var& b) { return elementwise(Binary::add, a, b); }
Var sub(const Var& a, const Var& b) { return elementwise(Binary::sub, a, b); }
Var mul(const Var& a, const Var& b) { return elementwise(Binary::mul, a, b); }
Var divide(const Var& a, const Var& b) { return elementwise(Binary::div, a, b); }
Var relu(const Var& x) { return elementwise(Unary::relu, x); }
Var sigmoid(const Var& x) { return elementwise(Unary::sigmoid, x); }
Var exp(const Var& x) { return elementwise(Unary::exp, x); }
Var neg_exp_exp(const Var& x) { return elementwise(Unary::neg_exp_exp, x); }
Var log(const Var& x) { return elementwise(Unary::log, x); }
Var tanh(const Var& x) { return elementwise(Unary::tanh, x); }
Var sqrt(const Var& x) { return elementwise(Unary::sqrt, x); }

Var scale(const Var& x, double c) { return mul(x, Var::constant(Tensor::scalar(c))); }
Var add_const(const Var& x, double c) { return add(x, Var::constant(Tensor::scalar(c))); }

Var reduce(Reduce kind, const Var& x, int axis) {
    std::vector<std::size_t> argmax;
    Tensor y = reduce(kind, x.val(), axis, kind == Reduce::max ? &argmax : nullptr);
    Tape* t = common_tape({&x});
    if (!t) return Var(std::move(y));
    int ix = node_on(*t, x);
    int id = t->emit(std::move(y), {ix},
                     [kind, axis, ix, argmax = std::move(argmax)](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(self);
        const Tensor& xv = tp.value_of(ix);
        Tensor dx(xv.shape());
        if (kind == Reduce::max) {
            for (std::size_t slot = 0; slot < argmax.size(); ++slot) dx[argmax[slot]] += g[slot];
        } else if (axis < 0) {
            double gv = g[0];
            if (kind == Reduce::mean) gv /= static_cast<double>(xv.numel());
            for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] = gv;
        } else {
            const auto ax = static_cast<std::size_t>(axis);
            const std::size_t extent = xv.dim(ax);
            std::size_t outer_n = 1, inner_n = 1;
            for (std::size_t i = 0; i < ax; ++i) outer_n *= xv.dim(i);
            for (std::size_t i = ax + 1; i < xv.rank(); ++i) inner_n *= xv.dim(i);
            const double inv = kind == Reduce::mean ? 1.0 / static_cast<double>(extent) : 1.0;
            for (std::size_t o = 0; o < outer_n; ++o)
                for (std::size_t in = 0; in < inner_n; ++in) {
                    const double gv = g[o * inner_n + in] * inv;
                    for (std::size_t e = 0; e < extent; ++e)
                        dx[o * extent * inner_n + e * inner_n + in] = gv;
                }
        }
        tp.accumulate(ix, dx);
    });
    return Var(t, id);
}

Var reduce_sum(const Var& x, int axis) { return reduce(Reduce::sum, x, axis); }
Var reduce_mean(const Var& x, int axis) { return reduce(Reduce::mean, x, axis); }
Var reduce_max(const Var& x, int axis) { return reduce(Reduce::max, x, axis); }

Var reshape(const Var& x, Tensor::Shape shape) {
    Tensor y = reshape(x.val(), shape);
    Tape* t = common_tape({&x});
    if (!t) return Var(std::move(y));
    int ix = node_on(*t, x);
    int id = t->emit(std::move(y), {ix}, [ix](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(self);
        tp.accumulate(ix, reshape(g, tp.value_of(ix).shape()));
    });
    return Var(t, id);
}

Var row(const Var& x, std::size_t i) {
    Tensor y = row(x.val(), i);
    Tape* t = common_tape({&x});
    if (!t) return Var(std::move(y));
    int ix = node_on(*t, x);
    int id = t->emit(std::move(y), {ix}, [ix, i](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(self);
        const Tensor& xv = tp.value_of(ix);
        Tensor dx(xv.shape());
        for (std::size_t j = 0; j < g.numel(); ++j) dx[i * xv.dim(1) + j] = g[j];
        tp.accumulate(ix, dx);
    });
    return Var(t, id);
}

Var rows_range(const Var& x, std::size_t begin, std::size_t n) {
    const Tensor& xv = x.val();
    if (xv.rank() != 2) throw ShapeError("rows_range requires a 2-D tensor");
    if (begin + n > xv.dim(0)) throw ShapeError("rows_range out of range");
    const std::size_t w = xv.dim(1);
    Tensor y({n, w});
    std::copy(xv.data() + begin * w, xv.data() + (begin + n) * w, y.data());

    Tape* t = common_tape({&x});
    if (!t) return Var(std::move(y));
    int ix = node_on(*t, x);
    int id = t->emit(std::move(y), {ix}, [ix, begin, n](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(self);
        const Tensor& xin = tp.value_of(ix);
        const std::size_t width = xin.dim(1);
        Tensor dx(xin.shape());
        for (std::size_t j = 0; j < n * width; ++j) dx[begin * width + j] = g[j];
        tp.accumulate(ix, dx);
    });
    return Var(t, id);
}

Var slice(const Var& x, std::size_t offset, std::size_t n) {
    Tensor y = slice(x.val(), offset, n);
    Tape* t = common_tape({&x});
    if (!t) return Var(std::move(y));
    int ix = node_on(*t, x);
    int id = t->emit(std::move(y), {ix}, [ix, offset, n](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(self);
        Tensor dx(tp.value_of(ix).shape());
        for (std::size_t j = 0; j < n; ++j) dx[offset + j] = g[j];
        tp.accumulate(ix, dx);
    });
    return Var(t, id);
}

Var concat(const std::vector<Var>& parts) {
    std::vector<Tensor> vals;
    vals.reserve(parts.size());
    for (const auto& p : parts) vals.push_back(p.val());
    Tensor y = concat(vals);

    Tape* t = nullptr;
    for (const auto& p : parts)
        if (p.tracked()) {
            if (t && p.tape() != t) throw StateError("operands recorded on different tapes");
            t = p.tape();
        }
    if (!t) return Var(std::move(y));
    std::vector<int> ids;
    ids.reserve(parts.size());
    for (const auto& p : parts) ids.push_back(node_on(*t, p));
    int id = t->emit(std::move(y), ids, [ids](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(self);
        std::size_t off = 0;
        for (int in : ids) {
            const std::size_t n = tp.value_of(in).numel();
            Tensor dx({n});
            for (std::size_t j = 0; j < n; ++j) dx[j] = g[off + j];
            tp.accumulate(in, dx);
            off += n;
        }
    });
    return Var(t, id);
}

Var stack_rows(const std::vector<Var>& rows) {
    std::vector<Tensor> vals;
    vals.reserve(rows.size());
    for (const auto& r : rows) vals.push_back(r.val());
    Tensor y = stack_rows(vals);

    Tape* t = nullptr;
    for (const auto& r : rows)
        if (r.tracked()) {
            if (t && r.tape() != t) throw StateError("operands recorded on different tapes");
            t = r.tape();
        }
    if (!t) return Var(std::move(y));
    std::vector<int> ids;
    ids.reserve(rows.size());
    for (const auto& r : rows) ids.push_back(node_on(*t, r));
    int id = t->emit(std::move(y), ids, [ids](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(self);
        const std::size_t w = g.dim(1);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            Tensor dx({w});
            for (std::size_t j = 0; j < w; ++j) dx[j] = g.at(i, j);
            tp.accumulate(ids[i], dx);
        }
    });
    return Var(t, id);
}

Var concat_rows(const Var& a, const Var& b) {
    Tensor y = concat_rows(a.val(), b.val());
    Tape* t = common_tape({&a, &b});
    if (!t) return Var(std::move(y));
    int ia = node_on(*t, a), ib = node_on(*t, b);
    int id = t->emit(std::move(y), {ia, ib}, [ia, ib](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(self);
        const Tensor& av = tp.value_of(ia);
        const Tensor& bv = tp.value_of(ib);
        Tensor da(av.shape()), db(bv.shape());
        for (std::size_t i = 0; i < av.numel(); ++i) da[i] = g[i];
        for (std::size_t i = 0; i < bv.numel(); ++i) db[i] = g[av.numel() + i];
        tp.accumulate(ia, da);
        tp.accumulate(ib, db);
    });
    return Var(t, id);
}

}  // namespace modrwkv
