#include "modrwkv/core/rng.hpp"

#include <cmath>
#include <numbers>

namespace modrwkv {

namespace {
std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
    // rejection sampling to avoid modulo bias
    const std::uint64_t limit = n * ((~0ULL) / n);
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % n;
}

double RngStream::normal(double mean, double stddev) {
    if (has_gauss_spare_) {
        has_gauss_spare_ = false;
        return mean + stddev * gauss_spare_;
    }
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    gauss_spare_ = r * std::sin(theta);
    has_gauss_spare_ = true;
    return mean + stddev * r * std::cos(theta);
}

RngStream RngStream::split() {
    std::uint64_t mix = seed_ ^ 0xd1b54a32d192ed03ULL;
    std::uint64_t child_seed = splitmix64(mix);
    std::uint64_t ctr = ++split_counter_;
    std::uint64_t folded = child_seed ^ (ctr * 0x9e3779b97f4a7c15ULL);
    return RngStream(splitmix64(folded));
}

RngStream::State RngStream::state() const {
    State st;
    st.seed = seed_;
    for (int i = 0; i < 4; ++i) st.s[i] = s_[i];
    st.split_counter = split_counter_;
    st.has_gauss_spare = has_gauss_spare_;
    st.gauss_spare = gauss_spare_;
    return st;
}

RngStream RngStream::from_state(const State& st) {
    RngStream r;
    r.seed_ = st.seed;
    for (int i = 0; i < 4; ++i) r.s_[i] = st.s[i];
    r.split_counter_ = st.split_counter;
    r.has_gauss_spare_ = st.has_gauss_spare;
    r.gauss_spare_ = st.gauss_spare;
    return r;
}

}  // namespace modrwkv
