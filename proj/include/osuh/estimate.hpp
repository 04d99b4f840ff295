// Sieve MLE driver: multi-start BFGS maximization of either likelihood over
// the free gamma matrix.
#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <future>
#include <limits>
#include <thread>
#include <vector>

#include "osuh/bfgs.hpp"
#include "osuh/errors.hpp"
#include "osuh/likelihood.hpp"
#include "osuh/rng.hpp"
#include "osuh/sieve.hpp"

namespace osuh {

struct IntegrationSpec {
    enum class Kind { Quadrature, MonteCarlo };
    Kind kind = Kind::Quadrature;
    int nodes = 64;           // Gauss-Legendre nodes (quadrature mode)
    int mc_draws = 200;       // S_j per basis (Monte Carlo mode)
};

struct FitConfig {
    int p_m = 5;
    int n_starts = 8;
    int max_iters = 2000;
    double grad_tol = 1e-6;
    IntegrationSpec integration;
    double start_spread = 1.0;  // stddev of the random gamma inits
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const {
        if (p_m < 1) throw ConfigError("FitConfig: p_m must be >= 1");
        if (n_starts < 1) throw ConfigError("FitConfig: n_starts must be >= 1");
        if (!(grad_tol > 0.0)) throw ConfigError("FitConfig: grad_tol must be positive");
    }
};

struct StartDiagnostics {
    double loglik = -std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    bool failed = false;
};

struct EstimationResult {
    SieveParams params;
    double loglik = -std::numeric_limits<double>::infinity();
    std::vector<StartDiagnostics> per_start;
    int best_start = -1;
    double gradient_norm = std::numeric_limits<double>::infinity();
    std::uint64_t seed = 0;
    std::uint64_t mc_seed = 0;  // seed of the fixed draws (censored MC mode)
};

namespace detail {

// Start 0 is the uniform-density init (gamma = 0); the rest are Gaussian.
inline std::vector<double> start_point(int p_m, int start, double spread, std::uint64_t seed) {
    std::vector<double> g(std::size_t(p_m) * p_m, 0.0);
    if (start == 0) return g;
    auto eng = make_engine(seed, 0x5747u + std::uint64_t(start));
    std::normal_distribution<double> nd(0.0, spread);
    for (std::size_t k = 1; k < g.size(); ++k) g[k] = nd(eng);
    return g;
}

template <class Engine>
EstimationResult fit_impl(const Engine& lik, const FitConfig& cfg) {
    cfg.validate();
    BfgsOptions opt;
    opt.max_iters = cfg.max_iters;
    opt.grad_tol = cfg.grad_tol;

    auto run_start = [&](int start) -> std::pair<StartDiagnostics, BfgsResult> {
        StartDiagnostics diag;
        BfgsResult br;
        auto x0 = start_point(cfg.p_m, start, cfg.start_spread, cfg.seed);
        auto fg = [&lik, p_m = cfg.p_m](const std::vector<double>& x, std::vector<double>& grad) {
            SieveParams p(p_m, x);
            std::vector<double> g;
            const double ll = lik.value_grad(p, g);
            grad = std::move(g);
            for (auto& v : grad) v = -v;
            return -ll;
        };
        try {
            br = bfgs_minimize(fg, std::move(x0), opt);
            diag.loglik = -br.f;
            diag.iterations = br.iterations;
            diag.converged = br.converged;
        } catch (const std::exception&) {
            diag.failed = true;
        }
        return {diag, std::move(br)};
    };

    std::vector<std::pair<StartDiagnostics, BfgsResult>> outcomes(cfg.n_starts);
    if (cfg.threads > 1) {
        std::vector<std::future<void>> futs;
        std::atomic<int> next{0};
        const int workers = std::min(cfg.threads, cfg.n_starts);
        for (int w = 0; w < workers; ++w)
            futs.push_back(std::async(std::launch::async, [&] {
                for (int s = next.fetch_add(1); s < cfg.n_starts; s = next.fetch_add(1))
                    outcomes[s] = run_start(s);
            }));
        for (auto& f : futs) f.get();
    } else {
        for (int s = 0; s < cfg.n_starts; ++s) outcomes[s] = run_start(s);
    }

    EstimationResult res;
    res.seed = cfg.seed;
    res.per_start.resize(cfg.n_starts);
    for (int s = 0; s < cfg.n_starts; ++s) {
        res.per_start[s] = outcomes[s].first;
        if (!outcomes[s].first.failed && outcomes[s].first.loglik > res.loglik) {
            res.loglik = outcomes[s].first.loglik;
            res.best_start = s;
        }
    }
    if (res.best_start < 0)
        throw EstimationError("fit: likelihood non-finite at every start");

    const BfgsResult& best = outcomes[res.best_start].second;
    std::vector<double> gamma = best.x;
    gamma[0] = 0.0;
    res.params = SieveParams(cfg.p_m, std::move(gamma));
    res.gradient_norm = best.grad_sup;
    softmax_weights(res.params);  // re-assert simplex validity of the optimum
    return res;
}

}  // namespace detail

inline EstimationResult fit_triples(const std::vector<TripleObs>& data, const FitConfig& cfg) {
    cfg.validate();
    const int nodes = cfg.integration.kind == IntegrationSpec::Kind::Quadrature
                          ? cfg.integration.nodes
                          : 64;
    TripleLikelihood lik(data, cfg.p_m, gauss_legendre(nodes));
    return detail::fit_impl(lik, cfg);
}

inline EstimationResult fit_censored(const std::vector<CensoredAuctionObs>& auctions,
                                     const FitConfig& cfg) {
    cfg.validate();
    if (cfg.integration.kind == IntegrationSpec::Kind::MonteCarlo) {
        const std::uint64_t mc_seed = detail::splitmix64(cfg.seed ^ 0x6D63647261777355ULL);
        McDraws mc = make_mc_draws(cfg.p_m, cfg.integration.mc_draws, mc_seed);
        CensoredLikelihood lik(auctions, cfg.p_m, mc);
        auto res = detail::fit_impl(lik, cfg);
        res.mc_seed = mc_seed;
        return res;
    }
    CensoredLikelihood lik(auctions, cfg.p_m, gauss_legendre(cfg.integration.nodes));
    return detail::fit_impl(lik, cfg);
}

}  // namespace osuh
