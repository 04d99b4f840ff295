// Policy analysis on a fitted or analytic model: bid/value quantiles, the
// first-price inverse bidding map, expected seller profit under a reserve
// price, optimal reserves from the hazard first-order condition, and the
// comparison of reserve-price schemes.
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "osuh/errors.hpp"
#include "osuh/numerics.hpp"
#include "osuh/parent_model.hpp"

namespace osuh {

struct ReserveProblem {
    ParentModel parent;
    double v0 = 0.5;                 // seller reservation value
    std::vector<double> N_pmf;       // pmf over potential-bidder counts, index = N
    double fixed_reserve = 1.0;      // the simple alternative scheme
    double status_quo = 0.7;         // prevailing reserve
    double min_reserve = 0.0;        // censored-model fits know F only above this

    void validate() const {
        if (!(v0 >= 0.0 && v0 < 1.0)) throw std::invalid_argument("ReserveProblem: v0 in [0,1)");
        double s = 0.0;
        for (double p : N_pmf) {
            if (p < 0.0) throw std::invalid_argument("ReserveProblem: negative pmf entry");
            s += p;
        }
        if (std::abs(s - 1.0) > 1e-9)
            throw std::invalid_argument("ReserveProblem: N pmf must sum to one");
    }
};

// Conditional bid quantile by bisection: returns b with |F(b|tau) - alpha|
// below tol. A flat stretch of the CDF at level alpha has no unique
// preimage and raises.
inline double bid_quantile(const ParentModel& parent, double tau, double alpha,
                           double tol = 1e-10) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("bid_quantile: alpha must be interior");
    auto F = [&](double x) { return parent.cond_cdf(x, tau); };
    const double b = bisect([&](double x) { return F(x) - alpha; }, 0.0, 1.0, 1e-14);
    if (std::abs(F(b) - alpha) > tol)
        throw NumericError("bid_quantile: bisection failed to reach tolerance");
    // Uniqueness probe: the level set of alpha must be a point, not a
    // plateau (a vanishing density is the limiting case and flags too).
    const double lo_level = alpha - 2.0 * tol;
    const double hi_level = alpha + 2.0 * tol;
    const double bl =
        lo_level <= 0.0 ? 0.0 : bisect([&](double x) { return F(x) - lo_level; }, 0.0, 1.0, 1e-14);
    const double bh =
        hi_level >= 1.0 ? 1.0 : bisect([&](double x) { return F(x) - hi_level; }, 0.0, 1.0, 1e-14);
    if (bh - bl > 1e-4)
        throw NumericError("bid_quantile: flat CDF region, quantile not unique");
    return b;
}

// First-price inverse bidding map at quantile level alpha:
//   v(alpha|tau) = b(alpha|tau) + alpha / ((n-1) f_bid(b(alpha)|tau)),
// using b'(alpha) = 1 / f_bid(b(alpha)).
inline double gpv_value_quantile(const ParentModel& bids, double tau, double alpha, int n,
                                 double density_floor = 1e-10) {
    if (n < 2) throw std::invalid_argument("gpv_value_quantile: need n >= 2");
    const double b = bid_quantile(bids, tau, alpha);
    const double fb = bids.cond_pdf(b, tau);
    if (!(fb > density_floor))
        throw NumericError(
            "gpv_value_quantile: bid density vanishes at the quantile, derivative blows up");
    return b + alpha / (double(n - 1) * fb);
}

// Expected seller profit from reserve price r with N potential bidders:
//   N [1-F(r)] F(r)^{N-1} (r - v0)
//     + N (N-1) int_r^1 (v - v0) f(v) [1-F(v)] F(v)^{N-2} dv.
inline double expected_profit(const ParentModel& parent, double tau, double r, int N, double v0) {
    if (N < 0) throw std::invalid_argument("expected_profit: need N >= 0");
    if (!(r >= 0.0 && r <= 1.0)) throw std::domain_error("expected_profit: r outside [0,1]");
    if (N == 0) return 0.0;
    auto cdf = [&](double x) {
        return std::min(1.0, std::max(0.0, parent.cond_cdf(x, tau)));
    };
    const double Fr = cdf(r);
    double first = double(N) * (1.0 - Fr) * (r - v0);
    if (N > 1) first *= std::pow(Fr, double(N - 1));
    double second = 0.0;
    if (N > 1 && r < 1.0) {
        second = double(N) * double(N - 1) *
                 adaptive_simpson(
                     [&](double v) {
                         const double Fv = cdf(v);
                         double g = (v - v0) * parent.cond_pdf(v, tau) * (1.0 - Fv);
                         if (N > 2) g *= std::pow(Fv, double(N - 2));
                         return g;
                     },
                     r, 1.0, 1e-10);
    }
    return first + second;
}

struct OptimalReserve {
    double r_star = 0.0;
    bool from_grid = false;   // FOC and grid maximizer disagreed beyond 1e-4
    bool boundary = false;    // no interior sign change of the FOC residual
};

namespace detail {

inline double grid_maximize_profit(const ParentModel& parent, double tau, double lo, double hi,
                                   int N_ref, double v0) {
    const int n_grid = 201;
    double best_r = lo, best_v = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_grid; ++i) {
        const double r = lo + (hi - lo) * i / (n_grid - 1.0);
        const double v = expected_profit(parent, tau, r, N_ref, v0);
        if (v > best_v) {
            best_v = v;
            best_r = r;
        }
    }
    // Golden-section refinement around the best grid cell.
    double a = std::max(lo, best_r - (hi - lo) / (n_grid - 1.0));
    double b = std::min(hi, best_r + (hi - lo) / (n_grid - 1.0));
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = expected_profit(parent, tau, x1, N_ref, v0);
    double f2 = expected_profit(parent, tau, x2, N_ref, v0);
    for (int it = 0; it < 60 && b - a > 1e-7; ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = expected_profit(parent, tau, x2, N_ref, v0);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = expected_profit(parent, tau, x1, N_ref, v0);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace detail

// Optimal reserve from the first-order condition
//   r* = v0 + (1 - F(r*|tau)) / f(r*|tau),
// solved by bisection on [max(v0, min_reserve), 1] and verified against a
// grid maximization of the expected profit at a reference N. A vanishing
// density caps the hazard term and defers to the grid route.
inline OptimalReserve optimal_reserve(const ParentModel& parent, double tau, double v0,
                                      double min_reserve = 0.0, int N_ref = 5) {
    if (!(v0 >= 0.0 && v0 < 1.0)) throw std::domain_error("optimal_reserve: v0 in [0,1)");
    const double lo = std::max(v0, min_reserve);
    auto residual = [&](double r) {
        const double f = parent.cond_pdf(r, tau);
        const double surv = 1.0 - parent.cond_cdf(r, tau);
        const double hazard_inv = surv / std::max(f, 1e-12);
        return r - v0 - std::min(hazard_inv, 1e6);
    };
    OptimalReserve out;
    if (!(residual(lo) < 0.0)) {
        // Residual already nonnegative at the bracket edge: boundary case.
        out.boundary = true;
        out.r_star = detail::grid_maximize_profit(parent, tau, lo, 1.0, N_ref, v0);
        return out;
    }
    const double root = bisect(residual, lo, 1.0, 1e-12);
    const double grid = detail::grid_maximize_profit(parent, tau, lo, 1.0, N_ref, v0);
    if (std::abs(root - grid) <= 1e-4) {
        out.r_star = root;
    } else {
        out.r_star = grid;
        out.from_grid = true;  // multimodal profit: trust the grid maximizer
    }
    return out;
}

struct RevenueReport {
    double gain_optimal = 0.0;    // UH-specific optimal reserve r*(tau)
    double gain_fixed = 0.0;      // fixed reserve (e.g. the appraisal value)
    double gain_status_quo = 0.0; // prevailing reserve
    double ratio = 0.0;           // (fixed - status quo) / (optimal - status quo)
    std::vector<double> tau_grid;
    std::vector<double> r_star;   // optimal reserve per tau node
    bool any_from_grid = false;
    bool any_boundary = false;
};

// Expected gains of three reserve schemes, integrated over the latent
// characteristic and the potential-bidder distribution.
inline RevenueReport revenue_compare(const ReserveProblem& problem, int tau_nodes = 64) {
    problem.validate();
    const auto rule = gauss_legendre(tau_nodes);
    RevenueReport rep;
    rep.tau_grid = rule.nodes;
    rep.r_star.resize(rule.size());

    auto profit_over_N = [&](double tau, double r) {
        double total = 0.0;
        for (std::size_t N = 0; N < problem.N_pmf.size(); ++N)
            if (problem.N_pmf[N] > 0.0)
                total += problem.N_pmf[N] * expected_profit(problem.parent, tau, r, int(N),
                                                            problem.v0);
        return total;
    };

    std::vector<double> t_opt(rule.size()), t_fix(rule.size()), t_sq(rule.size());
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const double tau = rule.nodes[q];
        const auto opt = optimal_reserve(problem.parent, tau, problem.v0, problem.min_reserve);
        rep.r_star[q] = opt.r_star;
        rep.any_from_grid = rep.any_from_grid || opt.from_grid;
        rep.any_boundary = rep.any_boundary || opt.boundary;
        const double w = rule.weights[q] * problem.parent.marg_t_pdf(tau);
        t_opt[q] = w * profit_over_N(tau, opt.r_star);
        t_fix[q] = w * profit_over_N(tau, problem.fixed_reserve);
        t_sq[q] = w * profit_over_N(tau, problem.status_quo);
    }
    rep.gain_optimal = pairwise_sum(t_opt);
    rep.gain_fixed = pairwise_sum(t_fix);
    rep.gain_status_quo = pairwise_sum(t_sq);
    const double denom = rep.gain_optimal - rep.gain_status_quo;
    rep.ratio = std::abs(denom) > 1e-15 ? (rep.gain_fixed - rep.gain_status_quo) / denom
                                        : std::numeric_limits<double>::quiet_NaN();
    return rep;
}

}  // namespace osuh
