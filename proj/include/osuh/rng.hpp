#pragma once

#include <cstdint>
#include <random>

#include "osuh/special_functions.hpp"

namespace osuh {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace detail

// Engine for an indexed stream (e.g. one auction, one replication, one
// optimizer start). Streams are independent of how work is partitioned
// across threads, so sampling stays deterministic under parallelism.
inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
    return std::mt19937_64(detail::splitmix64(detail::splitmix64(seed) ^ stream));
}

inline double draw_beta(std::mt19937_64& eng, const BetaParams& p) {
    std::gamma_distribution<double> ga(p.alpha, 1.0);
    std::gamma_distribution<double> gb(p.beta, 1.0);
    const double x = ga(eng);
    const double y = gb(eng);
    return x / (x + y);
}

}  // namespace osuh
