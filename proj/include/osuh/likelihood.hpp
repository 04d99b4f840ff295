// Log-likelihood assembly for (a) consecutive order-statistic triples and
// (b) reserve-price-censored ascending auctions, with Gauss-Legendre or
// fixed-draw Monte Carlo integration over the latent characteristic.
//
// Both likelihoods are evaluated through the joint sieve representation.
// Writing T = f^T(tau), C(x,tau) = sum_ij theta_ij B_i(x) beta_j(tau) and
// fj(x,tau) for the joint density, the triple integrand becomes
//   C(x)^{r-3} (T - C(z))^{n-r} fj(x) fj(y) fj(z) / T^{n-1},
// and the censored per-auction integrand p(n|N,tau) g(b|n,tau) reduces to
//   C_{N,n} n! (T - C(b_top)) prod_j fj(b_j) C(R)^{N-n} / T^N      (n >= 2)
// after the (T - C(R))^n factors cancel between p and g. Every piece is
// linear in theta, which keeps the analytic gradients cheap.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "osuh/errors.hpp"
#include "osuh/numerics.hpp"
#include "osuh/order_stats.hpp"
#include "osuh/rng.hpp"
#include "osuh/sieve.hpp"

namespace osuh {

// Fixed Monte Carlo draws, S_j per basis, from beta_j. Fixing the draws once
// per estimation run keeps the maximization smooth in the sieve parameters.
struct McDraws {
    int p_m = 0;
    std::vector<std::vector<double>> draws;  // draws[j], each of size S_j
    std::uint64_t seed = 0;
};

inline McDraws make_mc_draws(int p_m, int S_per_basis, std::uint64_t seed) {
    if (S_per_basis < 1) throw std::invalid_argument("make_mc_draws: need S >= 1");
    McDraws mc;
    mc.p_m = p_m;
    mc.seed = seed;
    mc.draws.resize(p_m);
    for (int j = 0; j < p_m; ++j) {
        auto eng = make_engine(seed, std::uint64_t(j) + 1);
        const BetaParams bj(double(j + 1), double(p_m - j));
        mc.draws[j].resize(S_per_basis);
        for (int s = 0; s < S_per_basis; ++s) mc.draws[j][s] = draw_beta(eng, bj);
    }
    return mc;
}

// Binomial participation probability p(n | N, tau) given F_R = F(R | tau).
inline double p_active(double F_R, int n, int N) {
    if (n < 0 || N < 0 || n > N) throw std::out_of_range("p_active: need 0 <= n <= N");
    if (F_R < 0.0 || F_R > 1.0) throw std::domain_error("p_active: F_R outside [0,1]");
    double v = std::exp(std::lgamma(N + 1.0) - std::lgamma(n + 1.0) - std::lgamma(N - n + 1.0));
    if (n > 0) v *= std::pow(1.0 - F_R, double(n));
    if (N > n) v *= std::pow(F_R, double(N - n));
    return v;
}

// Joint density of the observed bid vector given n active bidders:
//   n >= 2: n! (1 - Ftrunc(b_top)) prod_j ftrunc(b_j)
//   n in {0, 1}: 1 (no informative bids).
// Truncation uses the sieve conditional distribution at reserve R.
inline double g_bids(const SieveWeights& w, const CensoredAuctionObs& obs, double tau) {
    if (obs.n <= 1) return 1.0;
    for (double b : obs.bids)
        if (b < obs.R) return 0.0;
    const double survR = 1.0 - cond_cdf(w, obs.R, tau);
    if (!(survR > 0.0)) return 0.0;  // impossible observation under total truncation
    const double top = obs.bids.back();
    double v = std::exp(std::lgamma(obs.n + 1.0));
    v *= (1.0 - cond_cdf(w, top, tau)) / survR;
    for (double b : obs.bids) v *= cond_pdf(w, b, tau) / survR;
    return v;
}

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Basis values at the integration nodes, shared by all observations.
struct NodeCache {
    int p_m = 0;
    std::vector<double> bt;       // n_nodes x p_m, row-major
    std::vector<double> weights;  // quadrature weight, or 1/S_j for MC draw
    std::vector<int> basis_of;    // MC mode: which basis the draw came from; -1 in quad mode
    std::size_t n_nodes = 0;

    static NodeCache from_quadrature(int p_m, const QuadratureRule& quad) {
        NodeCache c;
        c.p_m = p_m;
        c.n_nodes = quad.size();
        c.bt.resize(c.n_nodes * p_m);
        c.weights = quad.weights;
        c.basis_of.assign(c.n_nodes, -1);
        for (std::size_t q = 0; q < c.n_nodes; ++q)
            basis_pdf_all(p_m, quad.nodes[q], std::span(c.bt).subspan(q * p_m, p_m));
        return c;
    }

    static NodeCache from_mc(const McDraws& mc) {
        NodeCache c;
        c.p_m = mc.p_m;
        for (const auto& d : mc.draws) c.n_nodes += d.size();
        c.bt.resize(c.n_nodes * mc.p_m);
        c.weights.resize(c.n_nodes);
        c.basis_of.resize(c.n_nodes);
        std::size_t q = 0;
        for (int j = 0; j < mc.p_m; ++j) {
            for (double tau : mc.draws[j]) {
                basis_pdf_all(mc.p_m, tau, std::span(c.bt).subspan(q * mc.p_m, mc.p_m));
                c.weights[q] = 1.0 / double(mc.draws[j].size());
                c.basis_of[q] = j;
                ++q;
            }
        }
        return c;
    }

    std::span<const double> row(std::size_t q) const {
        return std::span(bt).subspan(q * p_m, p_m);
    }
};

// Per-theta node state: u_q[i] = sum_j theta_ij beta_j(tau_q) and
// T_q = f^T(tau_q). Refreshed once per parameter vector, reused by every
// observation.
struct NodeState {
    std::vector<double> u;  // n_nodes x p_m
    std::vector<double> T;

    void refresh(const NodeCache& nodes, const SieveWeights& w) {
        const int p = nodes.p_m;
        u.assign(nodes.n_nodes * p, 0.0);
        T.assign(nodes.n_nodes, 0.0);
        for (std::size_t q = 0; q < nodes.n_nodes; ++q) {
            const auto bt = nodes.row(q);
            double* uq = u.data() + q * p;
            for (int i = 0; i < p; ++i) {
                double s = 0.0;
                for (int j = 0; j < p; ++j) s += w.th(i, j) * bt[j];
                uq[i] = s;
            }
            T[q] = dot(std::span(w.w1), bt);
        }
    }

    std::span<const double> row(std::size_t q, int p) const {
        return std::span(u).subspan(q * p, p);
    }
};

// Maps a gradient in theta to one in gamma through the softmax Jacobian,
// zeroing the pinned entry.
inline void chain_theta_to_gamma(const SieveWeights& w, std::span<const double> g_theta,
                                 std::span<double> g_gamma) {
    double inner = 0.0;
    for (std::size_t k = 0; k < g_theta.size(); ++k) inner += g_theta[k] * w.theta[k];
    for (std::size_t k = 0; k < g_theta.size(); ++k)
        g_gamma[k] = w.theta[k] * (g_theta[k] - inner);
    g_gamma[0] = 0.0;
}

}  // namespace detail

// Mean log-likelihood of consecutive order-statistic triples under the sieve
// model. The combinatorial constant is kept inside each term so reported
// values are proper log densities, comparable across (n, r) mixtures.
class TripleLikelihood {
public:
    TripleLikelihood(std::vector<TripleObs> data, int p_m, const QuadratureRule& quad)
        : data_(std::move(data)), p_m_(p_m), nodes_(detail::NodeCache::from_quadrature(p_m, quad)) {
        if (data_.empty()) throw std::invalid_argument("TripleLikelihood: empty dataset");
        const int p = p_m_;
        obs_.resize(data_.size());
        for (std::size_t o = 0; o < data_.size(); ++o) {
            const TripleObs& t = data_[o];
            t.validate();
            ObsCache& c = obs_[o];
            c.bx = basis_pdf_all(p, t.x);
            c.by = basis_pdf_all(p, t.y);
            c.bz = basis_pdf_all(p, t.z);
            c.Bx = basis_cdf_all(p, t.x);
            // Survival weights 1 - B_i(z): summing these against u stays
            // nonnegative and hits exact zero at z = 1, unlike T - C(z).
            c.SBz = basis_cdf_all(p, t.z);
            for (auto& v : c.SBz) v = 1.0 - v;
            c.r = t.r;
            c.n = t.n;
            c.log_c = std::log(coeff_c_full(t.r, t.n));
        }
    }

    std::size_t size() const { return data_.size(); }
    const std::vector<TripleObs>& data() const { return data_; }

    double value(const SieveParams& params) const {
        const SieveWeights w = softmax_weights(params);
        detail::NodeState st;
        st.refresh(nodes_, w);
        std::vector<double> terms(obs_.size());
        for (std::size_t o = 0; o < obs_.size(); ++o) terms[o] = term_value(o, st);
        return pairwise_sum(terms) / double(obs_.size());
    }

    // Value plus gradient with respect to gamma (pinned entry zeroed).
    double value_grad(const SieveParams& params, std::vector<double>& grad_gamma) const {
        const int p = p_m_;
        const SieveWeights w = softmax_weights(params);
        detail::NodeState st;
        st.refresh(nodes_, w);
        std::vector<double> g_theta(std::size_t(p) * p, 0.0);
        std::vector<double> terms(obs_.size());
        std::vector<double> grad_I(std::size_t(p) * p);
        std::vector<double> s(p);
        for (std::size_t o = 0; o < obs_.size(); ++o) {
            const ObsCache& c = obs_[o];
            std::fill(grad_I.begin(), grad_I.end(), 0.0);
            double I = 0.0;
            for (std::size_t q = 0; q < nodes_.n_nodes; ++q) {
                const auto uq = st.row(q, p);
                const double T = st.T[q];
                const double fx = detail::dot(c.bx, uq);
                const double fy = detail::dot(c.by, uq);
                const double fz = detail::dot(c.bz, uq);
                const double Cx = detail::dot(c.Bx, uq);
                const double Sz = detail::dot(c.SBz, uq);
                double G = fx * fy * fz / std::pow(T, double(c.n - 1));
                if (c.r > 3) G *= std::pow(Cx, double(c.r - 3));
                if (c.n > c.r) G *= std::pow(Sz, double(c.n - c.r));
                const double wG = nodes_.weights[q] * G;
                I += wG;
                if (!(G > 0.0)) continue;
                for (int k = 0; k < p; ++k) {
                    double sk = c.bx[k] / fx + c.by[k] / fy + c.bz[k] / fz - double(c.n - 1) / T;
                    if (c.r > 3) sk += double(c.r - 3) * c.Bx[k] / Cx;
                    if (c.n > c.r) sk += double(c.n - c.r) * c.SBz[k] / Sz;
                    s[k] = sk;
                }
                const auto bt = nodes_.row(q);
                for (int k = 0; k < p; ++k) {
                    const double a = wG * s[k];
                    double* gi = grad_I.data() + std::size_t(k) * p;
                    for (int l = 0; l < p; ++l) gi[l] += a * bt[l];
                }
            }
            if (!(I > 0.0) || !std::isfinite(I))
                throw NumericError("loglik_triples: non-positive integrated density at observation " +
                                   std::to_string(o));
            terms[o] = c.log_c + std::log(I);
            for (std::size_t k = 0; k < g_theta.size(); ++k) g_theta[k] += grad_I[k] / I;
        }
        const double m = double(obs_.size());
        for (auto& g : g_theta) g /= m;
        grad_gamma.assign(g_theta.size(), 0.0);
        detail::chain_theta_to_gamma(w, g_theta, grad_gamma);
        return pairwise_sum(terms) / m;
    }

private:
    struct ObsCache {
        std::vector<double> bx, by, bz, Bx, SBz;
        int r = 3, n = 3;
        double log_c = 0.0;
    };

    double term_value(std::size_t o, const detail::NodeState& st) const {
        const int p = p_m_;
        const ObsCache& c = obs_[o];
        double I = 0.0;
        for (std::size_t q = 0; q < nodes_.n_nodes; ++q) {
            const auto uq = st.row(q, p);
            const double T = st.T[q];
            double G = detail::dot(c.bx, uq) * detail::dot(c.by, uq) * detail::dot(c.bz, uq) /
                       std::pow(T, double(c.n - 1));
            if (c.r > 3) G *= std::pow(detail::dot(c.Bx, uq), double(c.r - 3));
            if (c.n > c.r) G *= std::pow(detail::dot(c.SBz, uq), double(c.n - c.r));
            I += nodes_.weights[q] * G;
        }
        if (!(I > 0.0) || !std::isfinite(I))
            throw NumericError("loglik_triples: non-positive integrated density at observation " +
                               std::to_string(o));
        return c.log_c + std::log(I);
    }

    std::vector<TripleObs> data_;
    int p_m_;
    detail::NodeCache nodes_;
    std::vector<ObsCache> obs_;
};

inline double loglik_triples(const SieveParams& params, const std::vector<TripleObs>& data,
                             const QuadratureRule& quad) {
    return TripleLikelihood(data, params.p_m, quad).value(params);
}

// Censored ascending-auction likelihood. Integration over tau runs either on
// the per-basis Monte Carlo draws (the mixture form
//   sum_j w1_j (1/S_j) sum_s p g |_{tau_sj},
// draws held fixed) or on a quadrature rule against f^T directly.
class CensoredLikelihood {
public:
    CensoredLikelihood(std::vector<CensoredAuctionObs> auctions, int p_m, const McDraws& mc)
        : CensoredLikelihood(std::move(auctions), p_m, detail::NodeCache::from_mc(mc)) {
        if (mc.p_m != p_m_) throw ConfigError("CensoredLikelihood: McDraws p_m mismatch");
    }

    CensoredLikelihood(std::vector<CensoredAuctionObs> auctions, int p_m, const QuadratureRule& quad)
        : CensoredLikelihood(std::move(auctions), p_m,
                             detail::NodeCache::from_quadrature(p_m, quad)) {}

    std::size_t size() const { return auctions_.size(); }

    double value(const SieveParams& params) const { return eval(params, nullptr); }

    double value_grad(const SieveParams& params, std::vector<double>& grad_gamma) const {
        return eval(params, &grad_gamma);
    }

private:
    CensoredLikelihood(std::vector<CensoredAuctionObs> auctions, int p_m, detail::NodeCache nodes)
        : auctions_(std::move(auctions)), p_m_(p_m), nodes_(std::move(nodes)) {
        if (auctions_.empty()) throw std::invalid_argument("CensoredLikelihood: empty dataset");
        const int p = p_m_;
        obs_.resize(auctions_.size());
        for (std::size_t a = 0; a < auctions_.size(); ++a) {
            const CensoredAuctionObs& c = auctions_[a];
            c.validate();
            AuctionCache& ac = obs_[a];
            ac.n = c.n;
            ac.N = c.N;
            ac.BR = basis_cdf_all(p, c.R);
            ac.log_const = std::lgamma(c.N + 1.0) - std::lgamma(c.N - c.n + 1.0);
            if (c.n >= 2) {
                // Survival weights at the top observed bid (see triple cache).
                ac.SBtop = basis_cdf_all(p, c.bids.back());
                for (auto& v : ac.SBtop) v = 1.0 - v;
                for (double b : c.bids) ac.bb.push_back(basis_pdf_all(p, b));
            } else if (c.n == 1) {
                // Sole bidder: informative only through participation.
                ac.SBtop = ac.BR;
                for (auto& v : ac.SBtop) v = 1.0 - v;
            }
        }
    }

    struct AuctionCache {
        int n = 0, N = 0;
        std::vector<double> BR;
        std::vector<double> SBtop;            // 1 - B_i at the top observed bid
        std::vector<std::vector<double>> bb;  // basis pdf at each observed bid
        double log_const = 0.0;               // log(C_{N,n} n!) = log(N!/(N-n)!)
    };

    double eval(const SieveParams& params, std::vector<double>* grad_gamma) const {
        const int p = p_m_;
        const SieveWeights w = softmax_weights(params);
        detail::NodeState st;
        st.refresh(nodes_, w);
        const bool mc_mode = nodes_.basis_of[0] >= 0;
        std::vector<double> g_theta(std::size_t(p) * p, 0.0);
        std::vector<double> grad_A(std::size_t(p) * p);
        std::vector<double> s(p);
        std::vector<double> terms(obs_.size());
        for (std::size_t a = 0; a < obs_.size(); ++a) {
            const AuctionCache& c = obs_[a];
            std::fill(grad_A.begin(), grad_A.end(), 0.0);
            double A = 0.0;
            for (std::size_t q = 0; q < nodes_.n_nodes; ++q) {
                const auto uq = st.row(q, p);
                const auto bt = nodes_.row(q);
                const double T = st.T[q];
                const double CR = detail::dot(c.BR, uq);
                double v = std::exp(c.log_const);
                double top_surv = 1.0;
                if (c.n >= 1) {
                    top_surv = detail::dot(c.SBtop, uq);
                    v *= top_surv;
                    for (const auto& bb : c.bb) v *= detail::dot(bb, uq);
                }
                if (c.N > c.n) v *= std::pow(CR, double(c.N - c.n));
                v /= std::pow(T, double(c.N));
                // Outer weight: w1_j / S_j in MC mode, quadrature weight times
                // f^T(tau_q) in quadrature mode.
                const double outer =
                    mc_mode ? w.w1[nodes_.basis_of[q]] * nodes_.weights[q] : nodes_.weights[q] * T;
                A += outer * v;
                if (grad_gamma == nullptr || !(v != 0.0) || !std::isfinite(v)) continue;
                // d phi / d theta_kl = phi * bt_l * s_k.
                for (int k = 0; k < p; ++k) {
                    double sk = -double(c.N) / T;
                    if (c.n >= 1) {
                        sk += c.SBtop[k] / top_surv;
                        for (const auto& bb : c.bb) sk += bb[k] / detail::dot(bb, uq);
                    }
                    if (c.N > c.n) sk += double(c.N - c.n) * c.BR[k] / CR;
                    s[k] = sk;
                }
                const double wv = outer * v;
                for (int k = 0; k < p; ++k) {
                    const double coef = wv * s[k];
                    double* gr = grad_A.data() + std::size_t(k) * p;
                    for (int l = 0; l < p; ++l) gr[l] += coef * bt[l];
                }
                if (mc_mode) {
                    // d w1_j / d theta_kl = [j == l].
                    const int j = nodes_.basis_of[q];
                    const double mv = nodes_.weights[q] * v;
                    for (int k = 0; k < p; ++k) grad_A[std::size_t(k) * p + j] += mv;
                } else {
                    // d f^T(tau_q) / d theta_kl = bt_l.
                    const double mv = nodes_.weights[q] * v;
                    for (int k = 0; k < p; ++k) {
                        double* gr = grad_A.data() + std::size_t(k) * p;
                        for (int l = 0; l < p; ++l) gr[l] += mv * bt[l];
                    }
                }
            }
            if (!(A > 0.0) || !std::isfinite(A))
                throw NumericError("loglik_censored: zero mixture likelihood at auction " +
                                   std::to_string(a));
            terms[a] = std::log(A);
            if (grad_gamma != nullptr)
                for (std::size_t k = 0; k < g_theta.size(); ++k) g_theta[k] += grad_A[k] / A;
        }
        const double m = double(obs_.size());
        if (grad_gamma != nullptr) {
            for (auto& g : g_theta) g /= m;
            grad_gamma->assign(g_theta.size(), 0.0);
            detail::chain_theta_to_gamma(w, g_theta, *grad_gamma);
        }
        return pairwise_sum(terms) / m;
    }

    std::vector<CensoredAuctionObs> auctions_;
    int p_m_;
    detail::NodeCache nodes_;
    std::vector<AuctionCache> obs_;
};

inline double loglik_censored(const SieveParams& params,
                              const std::vector<CensoredAuctionObs>& auctions, const McDraws& mc) {
    return CensoredLikelihood(auctions, params.p_m, mc).value(params);
}

}  // namespace osuh
