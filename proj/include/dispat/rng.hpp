#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "dispat/tensor.hpp"

namespace dispat {

/// splitmix64: tiny, fully specified generator. Used everywhere a stream of
/// reproducible numbers is needed, since the std distributions are free to
/// differ between standard libraries.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double next_range(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Uniform integer in [0, n). Modulo bias is negligible for n << 2^64.
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller. One draw per call; the sine partner is
    /// discarded to keep the call sequence simple.
    double next_normal() {
        double u1 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }
};

/// In-place Fisher-Yates using SplitMix64, so shuffles reproduce across
/// toolchains (std::shuffle does not guarantee that).
template <class T>
void deterministic_shuffle(std::vector<T>& v, SplitMix64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(v[i - 1], v[j]);
    }
}

/// Xavier/Glorot uniform fill: +-sqrt(6 / (fan_in + fan_out)).
inline void fill_xavier_uniform(Tensor& t, int fan_in, int fan_out, SplitMix64& rng) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t k = 0; k < t.size(); ++k) t.data()[k] = rng.next_range(-bound, bound);
}

inline void fill_normal(Tensor& t, double stddev, SplitMix64& rng) {
    for (std::size_t k = 0; k < t.size(); ++k) t.data()[k] = stddev * rng.next_normal();
}

} // namespace dispat
