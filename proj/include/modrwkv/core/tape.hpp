#pragma once

#include <functional>
#include <vector>

#include "modrwkv/core/param.hpp"
#include "modrwkv/core/tensor.hpp"

namespace modrwkv {

class Tape;

// Value handle used by every differentiable operation. Untracked Vars own
// their tensor and behave as plain values; tracked Vars are lightweight
// references to a tape node. The same model code therefore serves both
// training (with a tape) and inference (without one).
class Var {
public:
    Var() = default;
    explicit Var(Tensor v) : owned_(std::move(v)) {}
    Var(Tape* tape, int node) : tape_(tape), node_(node) {}

    static Var constant(Tensor v) { return Var(std::move(v)); }

    const Tensor& val() const;
    bool tracked() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }
    int node() const { return node_; }

    const Tensor::Shape& shape() const { return val().shape(); }

private:
    Tensor owned_;
    Tape* tape_ = nullptr;
    int node_ = -1;
};

// Reverse-mode tape. Nodes are tensor-level operations recorded in execution
// order (inputs always precede consumers); backward() runs one reverse sweep
// and accumulates into Parameter::grad for trainable leaves.
class Tape {
public:
    enum class Mode { recording, frozen };

    using BackwardFn = std::function<void(Tape&, int self)>;

    struct Node {
        Tensor value;
        Tensor grad;  // allocated lazily during backward
        std::vector<int> inputs;
        BackwardFn backward;  // empty for leaves
        Parameter* param = nullptr;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Mode mode() const { return mode_; }
    std::size_t size() const { return nodes_.size(); }

    Var leaf(Parameter& p);
    Var constant(Tensor t);
    int emit(Tensor value, std::vector<int> inputs, BackwardFn fn);

    const Tensor& value_of(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    // Gradient accumulator of a node, allocated to zeros on first touch.
    Tensor& grad_of(int id);
    bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad.numel() != 0; }
    // Adds a gradient contribution; the first contribution is adopted by move.
    void accumulate(int id, Tensor contribution);

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Throws
    // ShapeError for a non-scalar loss and StateError on a frozen tape.
    // The tape freezes afterwards; reset() makes it recordable again.
    void backward(const Var& loss);

    void reset();
    bool check_topological() const;

private:
    std::vector<Node> nodes_;
    Mode mode_ = Mode::recording;
};

// ---- recorded operations (each works tracked or untracked) ----

Var matmul(const Var& a, const Var& b);
Var outer(const Var& u, const Var& v);

Var elementwise(Unary kind, const Var& x);
Var elementwise(Binary kind, const Var& a, const Var& b);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var divide(const Var& a, const Var& b);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var exp(const Var& x);
Var neg_exp_exp(const Var& x);  // exp(-exp(x)), always in (0,1)
Var log(const Var& x);
Var tanh(const Var& x);
Var sqrt(const Var& x);

Var scale(const Var& x, double c);      // x * c, constant c
Var add_const(const Var& x, double c);  // x + c, constant c

Var reduce(Reduce kind, const Var& x, int axis = -1);
Var reduce_sum(const Var& x, int axis = -1);
Var reduce_mean(const Var& x, int axis = -1);
Var reduce_max(const Var& x, int axis = -1);

Var reshape(const Var& x, Tensor::Shape shape);
Var row(const Var& x, std::size_t i);
Var rows_range(const Var& x, std::size_t begin, std::size_t n);  // consecutive rows of a 2-D tensor
Var slice(const Var& x, std::size_t offset, std::size_t n);
Var concat(const std::vector<Var>& parts);
Var stack_rows(const std::vector<Var>& rows);
Var concat_rows(const Var& a, const Var& b);

}  // namespace modrwkv
