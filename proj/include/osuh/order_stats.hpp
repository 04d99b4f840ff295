// Joint densities and samplers for consecutive order statistics of bids,
// with and without reserve-price censoring.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "osuh/numerics.hpp"
#include "osuh/parent_model.hpp"
#include "osuh/rng.hpp"

namespace osuh {

// One auction's realized consecutive triple (X_{r-2:n}, X_{r-1:n}, X_{r:n}).
struct TripleObs {
    double x, y, z;
    int r, n;

    bool ordered() const { return x <= y && y <= z; }
    void validate() const {
        if (r < 3 || r > n) throw std::out_of_range("TripleObs: need 3 <= r <= n");
        if (!ordered()) throw std::invalid_argument("TripleObs: components must satisfy x <= y <= z");
    }
};

// One ascending auction under reserve price R: n of N potential bidders were
// active. For n >= 2 `bids` holds the n-1 observed bids sorted ascending
// (the top one equals the second-highest value); for n = 1 it is {R}; for
// n = 0 it is empty.
struct CensoredAuctionObs {
    std::vector<double> bids;
    int n = 0;
    int N = 0;
    double R = 0.0;

    void validate() const {
        if (n < 0 || N < 0 || n > N)
            throw std::invalid_argument("CensoredAuctionObs: need 0 <= n <= N");
        const std::size_t expect = n == 0 ? 0 : (n == 1 ? 1 : std::size_t(n - 1));
        if (bids.size() != expect)
            throw std::invalid_argument("CensoredAuctionObs: bid count inconsistent with n");
        for (std::size_t i = 0; i < bids.size(); ++i) {
            if (bids[i] < R) throw std::invalid_argument("CensoredAuctionObs: bid below reserve");
            if (i > 0 && bids[i] < bids[i - 1])
                throw std::invalid_argument("CensoredAuctionObs: bids not sorted");
        }
    }
};

// c_{r,n} = n! / ((r-2)! (n-r+1)!), the constant in the factorized triple
// density.
inline double coeff_c(int r, int n) {
    if (r < 3 || r > n) throw std::out_of_range("coeff_c: need 3 <= r <= n");
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(r - 1.0) - std::lgamma(n - r + 2.0));
}

// n! / ((r-3)! (n-r)!), the constant of the raw (unfactorized) triple density.
inline double coeff_c_full(int r, int n) {
    if (r < 3 || r > n) throw std::out_of_range("coeff_c_full: need 3 <= r <= n");
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(r - 2.0) - std::lgamma(n - r + 1.0));
}

// Joint density of the consecutive triple given tau:
//   c_full F(x)^{r-3} f(x) f(y) (1-F(z))^{n-r} f(z)  on  {x <= y <= z}.
// The r = 3 and r = n edges take the zero-exponent factors as exactly one.
inline double triple_pdf_given_tau(const ParentModel& parent, double tau, const TripleObs& obs) {
    if (obs.r < 3 || obs.r > obs.n)
        throw std::out_of_range("triple_pdf_given_tau: need 3 <= r <= n");
    if (!obs.ordered()) return 0.0;
    double v = parent.cond_pdf(obs.x, tau) * parent.cond_pdf(obs.y, tau) * parent.cond_pdf(obs.z, tau);
    if (obs.r > 3) v *= std::pow(parent.cond_cdf(obs.x, tau), double(obs.r - 3));
    if (obs.n > obs.r) v *= std::pow(1.0 - parent.cond_cdf(obs.z, tau), double(obs.n - obs.r));
    return coeff_c_full(obs.r, obs.n) * v;
}

// Unconditional triple density: integral of the conditional density against
// the marginal of the latent characteristic.
inline double triple_pdf(const ParentModel& model, const TripleObs& obs, const QuadratureRule& quad) {
    if (quad.size() < 2) throw ConfigError("triple_pdf: quadrature rule needs at least 2 nodes");
    return quad.integrate([&](double tau) {
        return triple_pdf_given_tau(model, tau, obs) * model.marg_t_pdf(tau);
    });
}

// Draws m auctions from the DGP: tau ~ tau_dist, n i.i.d. bids, and records
// ranks (r-2, r-1, r). Each auction has its own seed stream, so results do
// not depend on any parallel partitioning of the loop.
inline std::vector<TripleObs> sample_triples(const SyntheticDgp& dgp, std::size_t m, int n, int r,
                                             std::uint64_t seed) {
    if (r < 3 || r > n) throw std::out_of_range("sample_triples: need 3 <= r <= n");
    if (m < 1) throw std::invalid_argument("sample_triples: need m >= 1");
    std::vector<TripleObs> out;
    out.reserve(m);
    std::vector<double> draws(n);
    for (std::size_t i = 0; i < m; ++i) {
        auto eng = make_engine(seed, i);
        const double tau = draw_beta(eng, dgp.tau_dist);
        const BetaParams cond(dgp.cond_alpha(tau), dgp.cond_beta(tau));
        for (int k = 0; k < n; ++k) draws[k] = draw_beta(eng, cond);
        std::sort(draws.begin(), draws.end());
        out.push_back(TripleObs{draws[r - 3], draws[r - 2], draws[r - 1], r, n});
    }
    return out;
}

// Draws one censored ascending auction: N values, actives are those >= R
// (ties at R count as active). With n >= 2 active bidders the top value is
// never observed; the winning bid equals the second-highest value, so the
// emitted vector is the sorted actives with the maximum dropped.
inline CensoredAuctionObs sample_censored(const SyntheticDgp& dgp, int N, double R,
                                          std::uint64_t seed, std::uint64_t stream = 0) {
    if (N < 0) throw std::invalid_argument("sample_censored: need N >= 0");
    if (!(R >= 0.0 && R < 1.0)) throw std::domain_error("sample_censored: need 0 <= R < 1");
    auto eng = make_engine(seed, stream);
    const double tau = draw_beta(eng, dgp.tau_dist);
    const BetaParams cond(dgp.cond_alpha(tau), dgp.cond_beta(tau));
    std::vector<double> actives;
    for (int k = 0; k < N; ++k) {
        const double v = draw_beta(eng, cond);
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

inline std::vector<CensoredAuctionObs> sample_censored_many(const SyntheticDgp& dgp,
                                                            const std::vector<int>& Ns, double R,
                                                            std::uint64_t seed) {
    std::vector<CensoredAuctionObs> out;
    out.reserve(Ns.size());
    for (std::size_t i = 0; i < Ns.size(); ++i)
        out.push_back(sample_censored(dgp, Ns[i], R, seed, i));
    return out;
}

}  // namespace osuh
