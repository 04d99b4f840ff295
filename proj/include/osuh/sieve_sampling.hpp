// Exact samplers for a sieve model, using its mixture structure: the latent
// draw picks a basis column by the marginal weights w1, values pick a basis
// row by the conditional mixture weights at the realized latent point.
#pragma once

#include <algorithm>
#include <cstdint>

#include "osuh/order_stats.hpp"
#include "osuh/rng.hpp"
#include "osuh/sieve.hpp"

namespace osuh {

namespace detail {

inline int draw_index(std::mt19937_64& eng, std::span<const double> weights, double total) {
    std::uniform_real_distribution<double> unif(0.0, total);
    const double u = unif(eng);
    double acc = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        acc += weights[k];
        if (u <= acc) return int(k);
    }
    return int(weights.size()) - 1;
}

}  // namespace detail

inline double draw_sieve_tau(const SieveWeights& w, std::mt19937_64& eng) {
    const int j = detail::draw_index(eng, w.w1, 1.0);
    return draw_beta(eng, BetaParams(double(j + 1), double(w.p_m - j)));
}

inline double draw_sieve_conditional(const SieveWeights& w, double tau, std::mt19937_64& eng) {
    const auto bt = basis_pdf_all(w.p_m, tau);
    std::vector<double> cw(w.p_m, 0.0);
    double total = 0.0;
    for (int i = 0; i < w.p_m; ++i) {
        for (int j = 0; j < w.p_m; ++j) cw[i] += w.th(i, j) * bt[j];
        total += cw[i];
    }
    const int i = detail::draw_index(eng, cw, total);
    return draw_beta(eng, BetaParams(double(i + 1), double(w.p_m - i)));
}

// Censored ascending auction drawn from a sieve model, same conventions as
// sample_censored.
inline CensoredAuctionObs sample_censored_sieve(const SieveWeights& w, int N, double R,
                                                std::uint64_t seed, std::uint64_t stream = 0) {
    if (N < 0) throw std::invalid_argument("sample_censored_sieve: need N >= 0");
    if (!(R >= 0.0 && R < 1.0))
        throw std::domain_error("sample_censored_sieve: need 0 <= R < 1");
    auto eng = make_engine(seed, stream);
    const double tau = draw_sieve_tau(w, eng);
    std::vector<double> actives;
    for (int k = 0; k < N; ++k) {
        const double v = draw_sieve_conditional(w, tau, eng);
        if (v >= R) actives.push_back(v);
    }
    std::sort(actives.begin(), actives.end());
    CensoredAuctionObs obs;
    obs.n = int(actives.size());
    obs.N = N;
    obs.R = R;
    if (obs.n == 1) {
        obs.bids = {R};
    } else if (obs.n >= 2) {
        actives.pop_back();
        obs.bids = std::move(actives);
    }
    return obs;
}

}  // namespace osuh
