#include <doctest.h>

#include <cmath>

#include "modrwkv/core/fdcheck.hpp"
#include "modrwkv/core/rng.hpp"
#include "modrwkv/core/tape.hpp"

using namespace modrwkv;

namespace {

Tensor random_tensor(RngStream& rng, Tensor::Shape shape, double lo = -2.0, double hi = 2.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("backward of sum gives ones") {
    Parameter p("p", Tensor({3}, {1, 2, 3}));
    Tape tape;
    Var loss = reduce_sum(tape.leaf(p));
    tape.backward(loss);
    for (std::size_t i = 0; i < 3; ++i) CHECK(p.grad[i] == 1.0);
}

TEST_CASE("backward of sum of squares gives 2p") {
    Parameter p("p", Tensor({4}, {1, -2, 0.5, 3}));
    Tape tape;
    Var v = tape.leaf(p);
    tape.backward(reduce_sum(mul(v, v)));
    for (std::size_t i = 0; i < 4; ++i) CHECK(p.grad[i] == doctest::Approx(2.0 * p.value[i]));
}

TEST_CASE("backward errors: non-scalar loss, frozen tape, foreign loss") {
    Parameter p("p", Tensor({2}, {1, 2}));
    Tape tape;
    Var v = tape.leaf(p);
    CHECK_THROWS_AS(tape.backward(v), ShapeError);

    Var loss = reduce_sum(v);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), StateError);  // frozen after one sweep

    Tape other;
    Parameter q("q", Tensor({1}, {1.0}));
    Var ol = reduce_sum(other.leaf(q));
    CHECK_THROWS_AS(tape.backward(ol), StateError);
}

TEST_CASE("grad accumulates across backward calls on fresh tapes") {
    Parameter p("p", Tensor({2}, {1, 1}));
    for (int rep = 0; rep < 2; ++rep) {
        Tape tape;
        tape.backward(reduce_sum(tape.leaf(p)));
    }
    CHECK(p.grad[0] == 2.0);  // += semantics, zero_grads is explicit
    p.zero_grad();
    CHECK(p.grad[0] == 0.0);
}

TEST_CASE("frozen parameters receive no gradient") {
    Parameter p("p", Tensor({2}, {1, 2}));
    p.trainable = false;
    Tape tape;
    tape.backward(reduce_sum(tape.leaf(p)));
    CHECK(p.grad[0] == 0.0);
    CHECK(p.grad[1] == 0.0);
}

TEST_CASE("tape stays topologically ordered under arbitrary op sequences") {
    RngStream rng(3);
    Parameter p("p", random_tensor(rng, {4, 4}));
    Parameter q("q", random_tensor(rng, {4}));
    Tape tape;
    Var a = tape.leaf(p);
    Var b = tape.leaf(q);
    Var c = matmul(a, outer(b, b));
    Var d = relu(c);
    Var e = add(d, c);
    Var f = reduce_mean(mul(e, e));
    Var g = exp(scale(f, 0.01));
    tape.backward(g);
    CHECK(tape.check_topological());
}

TEST_CASE("mixed tracked/untracked operands promote to constants") {
    Parameter p("p", Tensor({2}, {1.0, 2.0}));
    Tape tape;
    Var v = tape.leaf(p);
    Var c = Var::constant(Tensor({2}, {3.0, 4.0}));
    Var y = mul(v, c);
    tape.backward(reduce_sum(y));
    CHECK(p.grad[0] == 3.0);
    CHECK(p.grad[1] == 4.0);
}

TEST_CASE("untracked ops never touch a tape") {
    Var a = Var::constant(Tensor({2}, {1, 2}));
    Var b = Var::constant(Tensor({2}, {3, 4}));
    Var y = add(mul(a, b), a);
    CHECK_FALSE(y.tracked());
    CHECK(y.val()[0] == 4.0);
    CHECK(y.val()[1] == 10.0);
}

TEST_CASE("max reduce routes gradient to the first argmax only") {
    Parameter p("p", Tensor({4}, {1.0, 7.0, 7.0, 2.0}));
    Tape tape;
    tape.backward(reduce_max(tape.leaf(p)));
    CHECK(p.grad[0] == 0.0);
    CHECK(p.grad[1] == 1.0);  // tie broken by lowest index
    CHECK(p.grad[2] == 0.0);
    CHECK(p.grad[3] == 0.0);
}

TEST_CASE("max backward agrees with finite differences off the tie") {
    Parameter p("p", Tensor({4}, {0.3, 1.9, -0.4, 0.7}));
    auto f = [&](bool record) {
        if (record) {
            Tape tape;
            Var loss = mul(reduce_max(tape.leaf(p)), reduce_max(tape.leaf(p)));
            tape.backward(loss);
            return loss.val().item();
        }
        Var loss = mul(reduce_max(Var::constant(p.value)), reduce_max(Var::constant(p.value)));
        return loss.val().item();
    };
    auto report = finite_difference_check(f, {&p}, 1e-5, 1e-6);
    CHECK(report.passed());
}

TEST_CASE("structural ops round-trip gradients") {
    RngStream rng(17);
    Parameter p("p", random_tensor(rng, {3, 4}));
    auto f = [&](bool record) {
        Tape tape;
        Var v = record ? tape.leaf(p) : Var::constant(p.value);
        Var r0 = row(v, 0);
        Var r2 = row(v, 2);
        Var cat = concat({slice(r0, 1, 2), r2});
        Var st = stack_rows({cat, cat});
        Var y = reduce_sum(mul(st, st));
        if (record) tape.backward(y);
        return y.val().item();
    };
    auto report = finite_difference_check(f, {&p}, 1e-6, 1e-7);
    CHECK(report.passed());
}

TEST_CASE("elementwise gradient suite vs central differences") {
    RngStream rng(23);
    Parameter p("p", random_tensor(rng, {5}, 0.2, 1.8));  // positive: log/sqrt-safe
    auto f = [&](bool record) {
        Tape tape;
        Var v = record ? tape.leaf(p) : Var::constant(p.value);
        Var y = add(mul(sigmoid(v), exp(scale(v, 0.3))),
                    add(log(v), add(sqrt(v), add(tanh(v), neg_exp_exp(v)))));
        Var loss = reduce_sum(mul(y, y));
        if (record) tape.backward(loss);
        return loss.val().item();
    };
    auto report = finite_difference_check(f, {&p}, 1e-6, 1e-6);
    CHECK(report.passed());
}

TEST_CASE("division gradients, both operands") {
    RngStream rng(29);
    Parameter a("a", random_tensor(rng, {4}));
    Parameter b("b", random_tensor(rng, {4}, 0.5, 2.0));
    auto f = [&](bool record) {
        Tape tape;
        Var va = record ? tape.leaf(a) : Var::constant(a.value);
        Var vb = record ? tape.leaf(b) : Var::constant(b.value);
        Var loss = reduce_sum(divide(va, vb));
        if (record) tape.backward(loss);
        return loss.val().item();
    };
    auto report = finite_difference_check(f, {&a, &b}, 1e-6, 1e-6);
    CHECK(report.passed());
}

TEST_CASE("fd check: quadratic passes tight tolerance") {
    Parameter p("p", Tensor({3}, {0.5, -1.0, 2.0}));
    auto f = [&](bool record) {
        Tape tape;
        Var v = record ? tape.leaf(p) : Var::constant(p.value);
        Var loss = reduce_sum(mul(v, v));
        if (record) tape.backward(loss);
        return loss.val().item();
    };
    auto report = finite_difference_check(f, {&p}, 1e-5, 1e-6);
    CHECK(report.passed());
    CHECK(report.max_rel_err() < 1e-6);
}

TEST_CASE("fd check: relu at a kink is flagged and excluded") {
    Parameter p("p", Tensor({2}, {0.0, 1.0}));  // element 0 sits on the kink
    auto f = [&](bool record) {
        Tape tape;
        Var v = record ? tape.leaf(p) : Var::constant(p.value);
        Var loss = reduce_sum(relu(v));
        if (record) tape.backward(loss);
        return loss.val().item();
    };
    auto report = finite_difference_check(f, {&p}, 1e-5, 1e-6);
    CHECK(report.passed());  // the kink element is excluded from failures
    CHECK(report.params[0].kink_elements == 1);
}

TEST_CASE("fd check: non-deterministic objective invalidates the report") {
    Parameter p("p", Tensor({1}, {1.0}));
    int calls = 0;
    auto f = [&](bool) { return static_cast<double>(++calls); };
    auto report = finite_difference_check(f, {&p}, 1e-5, 1e-6);
    CHECK_FALSE(report.valid);
    CHECK_FALSE(report.passed());
}

TEST_CASE("identical seeds give bit-identical forward values and gradients") {
    auto run = [](std::uint64_t seed) {
        RngStream rng(seed);
        Parameter p("p", random_tensor(rng, {6, 6}));
        Parameter q("q", random_tensor(rng, {6}));
        Tape tape;
        Var y = matmul(tape.leaf(p), outer(sigmoid(tape.leaf(q)), tape.leaf(q)));
        Var loss = reduce_mean(mul(y, y));
        tape.backward(loss);
        std::vector<double> out{loss.val().item()};
        for (std::size_t i = 0; i < p.grad.numel(); ++i) out.push_back(p.grad[i]);
        return out;
    };
    auto a = run(4242), b = run(4242);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}
