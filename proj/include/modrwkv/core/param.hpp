#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "modrwkv/core/tensor.hpp"

namespace modrwkv {

// Named trainable (or frozen) tensor with a gradient accumulator.
struct Parameter {
    Tensor value;
    Tensor grad;  // same shape, accumulated by Tape::backward
    bool trainable = true;
    std::string name;

    Parameter() = default;
    Parameter(std::string n, Tensor v)
        : value(std::move(v)), grad(Tensor::zeros(value.shape())), trainable(true), name(std::move(n)) {}

    void zero_grad() { grad = Tensor::zeros(value.shape()); }
};

// Flat, name-ordered parameter table. Ordered iteration keeps optimizer
// updates and checkpoint layout deterministic.
class ParameterStore {
public:
    Parameter& add(const std::string& name, Tensor init);
    Parameter& at(const std::string& name);
    const Parameter& at(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    std::size_t size() const { return params_.size(); }
    std::size_t total_elements() const;

    void zero_grads();
    // Sets trainable on every parameter whose name starts with one of the
    // prefixes (dotted-path prefix match); everything else is frozen.
    void set_trainable_by_prefix(const std::vector<std::string>& prefixes);

    template <typename Fn>
    void for_each(Fn&& fn) {
        for (auto& [name, p] : params_) fn(p);
    }
    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (const auto& [name, p] : params_) fn(p);
    }

    // FNV-1a over the raw bytes of every tensor whose name starts with
    // `prefix` (all parameters when empty). Used by the freeze-contract tests.
    std::uint64_t hash_values(const std::string& prefix = "") const;

private:
    std::map<std::string, Parameter> params_;
};

bool name_has_prefix(const std::string& name, const std::string& prefix);

}  // namespace modrwkv
