#include "modrwkv/core/param.hpp"

#include <cstring>

namespace modrwkv {

bool name_has_prefix(const std::string& name, const std::string& prefix) {
    if (prefix.empty()) return true;
    if (name.size() < prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return false;
    // exact match or boundary at a dot, so "adapter" does not match "adapters.x"
    return name.size() == prefix.size() || name[prefix.size()] == '.';
}

Parameter& ParameterStore::add(const std::string& name, Tensor init) {
    auto [it, inserted] = params_.try_emplace(name, name, std::move(init));
    if (!inserted) throw StateError("duplicate parameter name: " + name);
    return it->second;
}

Parameter& ParameterStore::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw StateError("unknown parameter: " + name);
    return it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw StateError("unknown parameter: " + name);
    return it->second;
}

std::size_t ParameterStore::total_elements() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params_) n += p.value.numel();
    return n;
}

void ParameterStore::zero_grads() {
    for (auto& [name, p] : params_) p.zero_grad();
}

void ParameterStore::set_trainable_by_prefix(const std::vector<std::string>& prefixes) {
    for (auto& [name, p] : params_) {
        bool t = false;
        for (const auto& pre : prefixes)
            if (name_has_prefix(name, pre)) {
                t = true;
                break;
            }
        p.trainable = t;
    }
}

std::uint64_t ParameterStore::hash_values(const std::string& prefix) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* ptr, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(ptr);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [name, p] : params_) {
        if (!name_has_prefix(name, prefix)) continue;
        feed(name.data(), name.size());
        feed(p.value.data(), p.value.numel() * sizeof(double));
    }
    return h;
}

}  // namespace modrwkv
