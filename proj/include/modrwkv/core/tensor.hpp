#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "modrwkv/core/errors.hpp"

namespace modrwkv {

// Process-wide tensor allocation accounting. Used by the inference
// benchmarks to demonstrate that streaming decode runs in constant memory.
struct AllocStats {
    static std::size_t current_bytes();
    static std::size_t peak_bytes();
    static void reset_peak();
    // internal hooks, called by the tensor allocator
    static void on_alloc(std::size_t bytes);
    static void on_free(std::size_t bytes);
};

template <typename T>
struct CountingAllocator {
    using value_type = T;
    CountingAllocator() = default;
    template <typename U>
    CountingAllocator(const CountingAllocator<U>&) {}

    T* allocate(std::size_t n) {
        AllocStats::on_alloc(n * sizeof(T));
        return static_cast<T*>(::operator new(n * sizeof(T)));
    }
    void deallocate(T* p, std::size_t n) {
        AllocStats::on_free(n * sizeof(T));
        ::operator delete(p);
    }
    bool operator==(const CountingAllocator&) const { return true; }
    bool operator!=(const CountingAllocator&) const { return false; }
};

// Dense row-major tensor of 64-bit scalars. The whole engine runs in
// double precision; the benchmark CLI has a separate f32 decode kernel.
class Tensor {
public:
    using Shape = std::vector<std::size_t>;
    using Data = std::vector<double, CountingAllocator<double>>;

    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::initializer_list<double> values);
    Tensor(Shape shape, const std::vector<double>& values);

    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, double v) { return Tensor(std::move(shape), v); }
    static Tensor eye(std::size_t n);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    bool is_scalar() const { return numel() == 1; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    double item() const;  // value of a one-element tensor

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;

    std::vector<double> to_vector() const { return {data_.begin(), data_.end()}; }

private:
    Shape shape_;
    Data data_;
};

std::string shape_str(const Tensor::Shape& s);
std::size_t shape_numel(const Tensor::Shape& s);

// ---- dense kernels (value in, value out; no tape involvement) ----

Tensor matmul(const Tensor& a, const Tensor& b);     // [m×k]·[k×n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a · bᵀ
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // aᵀ · b
Tensor outer(const Tensor& u, const Tensor& v);      // [d1]⊗[d2]
Tensor transpose(const Tensor& a);

enum class Unary { relu, sigmoid, exp, neg_exp_exp, log, tanh, sqrt, neg };
enum class Binary { add, sub, mul, div };

Tensor elementwise(Unary kind, const Tensor& x);
// Broadcasting is restricted to scalar↔tensor and equal shapes.
Tensor elementwise(Binary kind, const Tensor& a, const Tensor& b);

enum class Reduce { sum, mean, max };

// axis < 0 reduces over all elements to a scalar; otherwise removes `axis`.
// For max, `argmax_out` (when non-null) receives the flat input index of the
// chosen element per output slot, ties broken by lowest index.
Tensor reduce(Reduce kind, const Tensor& x, int axis = -1,
              std::vector<std::size_t>* argmax_out = nullptr);

Tensor reshape(const Tensor& x, Tensor::Shape shape);
Tensor row(const Tensor& x, std::size_t i);                       // 2-D → 1-D
Tensor slice(const Tensor& x, std::size_t offset, std::size_t n); // 1-D
Tensor concat(const std::vector<Tensor>& parts);                  // 1-D
Tensor stack_rows(const std::vector<Tensor>& rows);               // 1-D list → 2-D
Tensor concat_rows(const Tensor& a, const Tensor& b);             // 2-D row concat

// ReLU kink proximity monitor for finite-difference probing. While enabled it
// records the sign of every relu input element; a second aligned pass reports
// whether any element changed sign between the passes (i.e. the perturbation
// stepped across the kink).
struct KinkMonitor {
    static void arm_record();   // start recording pass
    static void arm_compare();  // start comparison pass (same op order expected)
    static void disarm();
    static bool crossed();
};

}  // namespace modrwkv
