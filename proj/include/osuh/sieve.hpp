// Bernstein/Beta-mixture tensor sieve for the joint density of (X, T):
//   f(x, tau) = sum_ij theta_ij beta_i(x) beta_j(tau),
// with basis beta_i = Beta(i, p_m + 1 - i), i = 1..p_m (1-based, mirroring
// the construction; storage below is 0-based). Mixture weights are the
// softmax of a free matrix gamma with gamma_11 pinned to zero.
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "osuh/errors.hpp"
#include "osuh/parent_model.hpp"
#include "osuh/special_functions.hpp"

namespace osuh {

// Free sieve parameters. gamma is row-major p_m x p_m; entry (0,0) is the
// pinned softmax normalization and must be exactly zero.
struct SieveParams {
    int p_m = 5;
    std::vector<double> gamma;

    SieveParams() : gamma(25, 0.0) {}
    SieveParams(int order, std::vector<double> g) : p_m(order), gamma(std::move(g)) { validate(); }

    double& at(int i, int j) { return gamma[std::size_t(i) * p_m + j]; }
    double at(int i, int j) const { return gamma[std::size_t(i) * p_m + j]; }

    void validate() const {
        if (p_m < 1) throw std::invalid_argument("SieveParams: p_m must be >= 1");
        if (gamma.size() != std::size_t(p_m) * p_m)
            throw std::invalid_argument("SieveParams: gamma must be p_m x p_m");
        if (gamma[0] != 0.0)
            throw std::invalid_argument("SieveParams: gamma[1][1] must be pinned to 0");
        for (double g : gamma)
            if (!std::isfinite(g)) throw std::invalid_argument("SieveParams: non-finite gamma entry");
    }
};

// Simplex weights derived from SieveParams, plus the column sums w1 that
// weight the marginal density of the latent characteristic.
struct SieveWeights {
    int p_m = 0;
    std::vector<double> theta;  // row-major [i * p_m + j], i indexes x, j indexes tau
    std::vector<double> w1;     // w1[j] = sum_i theta[i][j]

    double th(int i, int j) const { return theta[std::size_t(i) * p_m + j]; }
};

inline SieveWeights softmax_weights(const SieveParams& params) {
    params.validate();
    const int p = params.p_m;
    SieveWeights w;
    w.p_m = p;
    w.theta.resize(params.gamma.size());
    w.w1.assign(p, 0.0);
    double mx = params.gamma[0];
    for (double g : params.gamma) mx = std::max(mx, g);
    double total = 0.0;
    for (std::size_t k = 0; k < params.gamma.size(); ++k) {
        w.theta[k] = std::exp(params.gamma[k] - mx);
        total += w.theta[k];
    }
    for (std::size_t k = 0; k < params.gamma.size(); ++k) w.theta[k] /= total;
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) w.w1[j] += w.th(i, j);
    return w;
}

// All p_m basis densities at x. beta_i reduces to a scaled Bernstein
// polynomial: beta_i(x) = p_m * C(p_m-1, i-1) x^{i-1} (1-x)^{p_m-i}.
// Endpoint values are finite for every i since the shapes are >= 1.
inline void basis_pdf_all(int p_m, double x, std::span<double> out) {
    const double omx = 1.0 - x;
    double binom = 1.0;  // C(p_m-1, i)
    double xp = 1.0;
    // Powers of (1-x) descending from p_m-1.
    double omxp = 1.0;
    for (int k = 0; k < p_m - 1; ++k) omxp *= omx;
    for (int i = 0; i < p_m; ++i) {
        out[i] = p_m * binom * xp * omxp;
        if (i + 1 < p_m) {
            binom = binom * double(p_m - 1 - i) / double(i + 1);
            xp *= x;
            if (omx > 0.0)
                omxp /= omx;
            else {
                // Recompute the remaining power directly when x == 1.
                omxp = (i + 2 == p_m) ? 1.0 : 0.0;
            }
        }
    }
}

inline std::vector<double> basis_pdf_all(int p_m, double x) {
    std::vector<double> out(p_m);
    basis_pdf_all(p_m, x, out);
    return out;
}

inline void basis_cdf_all(int p_m, double x, std::span<double> out) {
    for (int i = 0; i < p_m; ++i) out[i] = reg_inc_beta(double(i + 1), double(p_m - i), x);
}

inline std::vector<double> basis_cdf_all(int p_m, double x) {
    std::vector<double> out(p_m);
    basis_cdf_all(p_m, x, out);
    return out;
}

inline double joint_pdf(const SieveWeights& w, double x, double tau) {
    const auto bx = basis_pdf_all(w.p_m, x);
    const auto bt = basis_pdf_all(w.p_m, tau);
    double s = 0.0;
    for (int i = 0; i < w.p_m; ++i)
        for (int j = 0; j < w.p_m; ++j) s += w.th(i, j) * bx[i] * bt[j];
    return s;
}

inline double marginal_t_pdf(const SieveWeights& w, double tau) {
    const auto bt = basis_pdf_all(w.p_m, tau);
    double s = 0.0;
    for (int j = 0; j < w.p_m; ++j) s += w.w1[j] * bt[j];
    return s;
}

inline double cond_pdf(const SieveWeights& w, double x, double tau) {
    const double marg = marginal_t_pdf(w, tau);
    if (!(marg > 0.0))
        throw NumericError("cond_pdf: marginal density vanishes at tau, conditioning degenerate");
    return joint_pdf(w, x, tau) / marg;
}

// Conditional CDF in closed form through the regularized incomplete beta.
inline double cond_cdf(const SieveWeights& w, double x, double tau) {
    const double marg = marginal_t_pdf(w, tau);
    if (!(marg > 0.0))
        throw NumericError("cond_cdf: marginal density vanishes at tau, conditioning degenerate");
    const auto Bx = basis_cdf_all(w.p_m, x);
    const auto bt = basis_pdf_all(w.p_m, tau);
    double s = 0.0;
    for (int i = 0; i < w.p_m; ++i)
        for (int j = 0; j < w.p_m; ++j) s += w.th(i, j) * Bx[i] * bt[j];
    return s / marg;
}

// d log f(x,tau) / d gamma_kl = theta_kl (beta_k(x) beta_l(tau) / f - 1),
// with the pinned entry's component zeroed.
inline std::vector<double> grad_log_joint_gamma(const SieveWeights& w, double x, double tau) {
    const auto bx = basis_pdf_all(w.p_m, x);
    const auto bt = basis_pdf_all(w.p_m, tau);
    double f = 0.0;
    for (int i = 0; i < w.p_m; ++i)
        for (int j = 0; j < w.p_m; ++j) f += w.th(i, j) * bx[i] * bt[j];
    std::vector<double> g(w.theta.size());
    for (int i = 0; i < w.p_m; ++i)
        for (int j = 0; j < w.p_m; ++j) {
            const std::size_t k = std::size_t(i) * w.p_m + j;
            g[k] = w.theta[k] * (bx[i] * bt[j] / f - 1.0);
        }
    g[0] = 0.0;
    return g;
}

// Parent-family view of a fitted sieve, for counterfactual analysis.
inline ParentModel sieve_parent(const SieveWeights& w) {
    return ParentModel{[w](double x, double tau) { return cond_pdf(w, x, tau); },
                       [w](double x, double tau) { return cond_cdf(w, x, tau); },
                       [w](double tau) { return marginal_t_pdf(w, tau); }};
}

}  // namespace osuh
