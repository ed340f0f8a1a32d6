#pragma once

#include <cstdint>
#include <random>

namespace attribroi {

// splitmix64 finalizer; used to derive independent stream seeds from a
// master seed plus stream tags, so per-sample / per-epoch randomness stays
// reproducible no matter how the work is ordered.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return mix_seed(mix_seed(seed) ^ tag);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag_a, std::uint64_t tag_b) {
    return mix_seed(derive_seed(seed, tag_a) ^ mix_seed(tag_b));
}

// Normal draw rejected outside two standard deviations.
inline double truncated_normal(std::mt19937_64& rng, double sigma) {
    std::normal_distribution<double> dist(0.0, sigma);
    for (;;) {
        const double v = dist(rng);
        if (v >= -2.0 * sigma && v <= 2.0 * sigma) return v;
    }
}

}  // namespace attribroi
