#pragma once

#include <cstdint>
#include <vector>

namespace modrwkv {

// Deterministic random stream: xoshiro256++ seeded through splitmix64.
// Same seed gives the same draw sequence on every platform; all model
// initialization and data generation flows through this type. Normal draws
// use Box-Muller on explicit 53-bit uniforms (std::normal_distribution is
// not reproducible across standard libraries).
class RngStream {
public:
    explicit RngStream(std::uint64_t seed);

    std::uint64_t next_u64();
    double uniform();                          // [0, 1)
    double uniform(double lo, double hi);      // [lo, hi)
    std::uint64_t uniform_index(std::uint64_t n);  // [0, n), unbiased
    double normal(double mean = 0.0, double stddev = 1.0);

    // Child stream derived from (seed, split counter); independent of draws
    // already taken from this stream.
    RngStream split();

    std::uint64_t seed() const { return seed_; }

    // Full serializable state for bit-exact checkpoint resume.
    struct State {
        std::uint64_t seed;
        std::uint64_t s[4];
        std::uint64_t split_counter;
        bool has_gauss_spare;
        double gauss_spare;
    };
    State state() const;
    static RngStream from_state(const State& st);

private:
    RngStream() = default;
    std::uint64_t seed_ = 0;
    std::uint64_t s_[4] = {0, 0, 0, 0};
    std::uint64_t split_counter_ = 0;
    bool has_gauss_spare_ = false;
    double gauss_spare_ = 0.0;
};

}  // namespace modrwkv
