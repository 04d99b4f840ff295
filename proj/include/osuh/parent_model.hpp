// The conditional bid family abstraction: a conditional density/CDF pair on
// [0,1] x [0,1] plus the marginal density of the latent auction
// characteristic. Order-statistic and reserve-truncated densities are derived
// from it.
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "osuh/errors.hpp"
#include "osuh/special_functions.hpp"

namespace osuh {

// Type-erased conditional family {f(x|tau), F(x|tau), f_T(tau)}.
// Contract: F(0|tau) = 0, F(1|tau) = 1, F nondecreasing in x, and the
// marginal integrates to one.
struct ParentModel {
    std::function<double(double x, double tau)> cond_pdf;
    std::function<double(double x, double tau)> cond_cdf;
    std::function<double(double tau)> marg_t_pdf;
};

// Synthetic data-generating process: tau ~ Beta(tau_dist), and
// X | tau ~ Beta(cond_alpha(tau), cond_beta(tau)).
struct SyntheticDgp {
    BetaParams tau_dist;
    std::function<double(double)> cond_alpha;
    std::function<double(double)> cond_beta;

    double cond_pdf(double x, double tau) const {
        return beta_pdf(BetaParams(cond_alpha(tau), cond_beta(tau)), x);
    }
    double cond_cdf(double x, double tau) const {
        return beta_cdf(BetaParams(cond_alpha(tau), cond_beta(tau)), x);
    }
    double marg_t_pdf(double tau) const { return beta_pdf(tau_dist, tau); }

    ParentModel as_parent() const {
        return ParentModel{
            [*this](double x, double tau) { return cond_pdf(x, tau); },
            [*this](double x, double tau) { return cond_cdf(x, tau); },
            [*this](double tau) { return marg_t_pdf(tau); }};
    }
};

// The simulation design used throughout the test bench: tau ~ Beta(3, 1.5),
// X | tau ~ Beta(1.5, 1.5 (1 + tau)).
inline SyntheticDgp default_dgp() {
    return SyntheticDgp{BetaParams(3.0, 1.5),
                        [](double) { return 1.5; },
                        [](double tau) { return 1.5 * (1.0 + tau); }};
}

inline ParentModel uniform_parent() {
    return ParentModel{[](double, double) { return 1.0; },
                       [](double x, double) { return x; },
                       [](double) { return 1.0; }};
}

// Density of the r-th smallest of s i.i.d. draws from the conditional family:
// f_{r:s}(x) = s! / ((r-1)! (s-r)!) F^{r-1} (1-F)^{s-r} f.
// Zero exponents are taken literally so F = 0 or F = 1 never produces 0^0.
inline double os_pdf(const ParentModel& parent, double tau, int r, int s, double x) {
    if (r < 1 || s < 1 || r > s)
        throw std::out_of_range("os_pdf: rank r must satisfy 1 <= r <= s");
    const double f = parent.cond_pdf(x, tau);
    double v = f;
    if (r > 1) v *= std::pow(parent.cond_cdf(x, tau), double(r - 1));
    if (s > r) v *= std::pow(1.0 - parent.cond_cdf(x, tau), double(s - r));
    return std::exp(std::lgamma(s + 1.0) - std::lgamma(double(r)) - std::lgamma(double(s - r + 1))) * v;
}

// CDF of the r-th smallest of s draws: P(at least r of s fall below x).
inline double os_cdf(const ParentModel& parent, double tau, int r, int s, double x) {
    if (r < 1 || s < 1 || r > s)
        throw std::out_of_range("os_cdf: rank r must satisfy 1 <= r <= s");
    const double F = parent.cond_cdf(x, tau);
    // Binomial tail via the incomplete beta identity.
    return reg_inc_beta(double(r), double(s - r + 1), F);
}

// Conditional density truncated to [R, 1] by a binding reserve price.
inline double trunc_pdf(const ParentModel& parent, double tau, double R, double x) {
    if (!(R < 1.0)) throw std::domain_error("trunc_pdf: reserve must satisfy R < 1");
    if (x < R) throw std::domain_error("trunc_pdf: x below reserve price");
    const double surv = 1.0 - parent.cond_cdf(R, tau);
    if (!(surv > 0.0))
        throw NumericError("trunc_pdf: total truncation, F(R|tau) = 1");
    return parent.cond_pdf(x, tau) / surv;
}

}  // namespace osuh
