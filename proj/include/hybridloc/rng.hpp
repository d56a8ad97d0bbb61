#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace hybridloc {

// Deterministic randomness utilities. Distribution sampling is hand-rolled on
// top of std::mt19937_64 so that sequences are identical across standard
// library implementations (std::normal_distribution et al. are not portable).

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D2B917F64A9C35ull;
    return z ^ (z >> 31);
}

// Derives a well-separated seed for substream `index` of stream `purpose`.
// Distinct (seed, purpose, index) triples give independent generators, so
// adding draws to one phase of a simulation never perturbs another.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t purpose,
                                 std::uint64_t index = 0) {
    std::uint64_t state = seed;
    (void)splitmix64(state);
    state ^= 0xA0761D6478BD642Full * (purpose + 1);
    (void)splitmix64(state);
    state ^= 0xE7037ED1A0B428DBull * (index + 1);
    return splitmix64(state);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t purpose,
                                std::uint64_t index = 0) {
    return std::mt19937_64(derive_seed(seed, purpose, index));
}

// Uniform on (0, 1]; never returns 0 so it is safe under log().
inline double uniform_unit(std::mt19937_64& g) {
    return static_cast<double>((g() >> 11) + 1) * 0x1.0p-53;
}

// Uniform on [lo, hi).
inline double uniform_in(std::mt19937_64& g, double lo, double hi) {
    double u = static_cast<double>(g() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
}

inline int uniform_int(std::mt19937_64& g, int lo, int hi_inclusive) {
    double u = static_cast<double>(g() >> 11) * 0x1.0p-53;
    int span = hi_inclusive - lo + 1;
    int k = static_cast<int>(u * span);
    if (k >= span) k = span - 1;
    return lo + k;
}

// Standard normal via Box-Muller; consumes exactly two draws per sample.
inline double standard_normal(std::mt19937_64& g) {
    double u1 = uniform_unit(g);
    double u2 = uniform_unit(g);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline double normal(std::mt19937_64& g, double mean, double stddev) {
    return mean + stddev * standard_normal(g);
}

} // namespace hybridloc
