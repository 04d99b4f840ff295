// Desk-scale numerical verification of the operator-diagonalization
// identification argument. The latent characteristic is discretized to K
// mass points, which turns the operator statements into exact
// finite-dimensional matrix identities:
//
//   J_y = L diag(Delta_y) H,   J_{y1} pinv(J_{y2}) = L diag(lambda) pinv(L),
//
// with eigenvalues lambda_k = f(y1|tau_k) / f(y2|tau_k) and eigenvectors the
// top-order-statistic densities on the low segment. Parent distributions are
// then recovered segment by segment, scales pinned by continuity at the
// cutoffs plus unit total mass, the latent index ordered by conditional
// means, and the marginal masses extracted from the pair density of the two
// highest observed ranks.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "osuh/errors.hpp"
#include "osuh/numerics.hpp"
#include "osuh/parent_model.hpp"
#include "osuh/special_functions.hpp"

namespace osuh {

struct Partition {
    double c1, c2;

    Partition(double a, double b) : c1(a), c2(b) {
        if (!(0.0 < c1 && c1 < c2 && c2 < 1.0))
            throw std::invalid_argument("Partition: need 0 < c1 < c2 < 1");
    }
};

// Latent characteristic on K mass points with Beta conditionals. Also hosts
// the quadrature-node discretization of a continuous model, in which case
// `mass` holds node weight times marginal density.
struct DiscreteTauModel {
    std::vector<double> tau;
    std::vector<double> mass;
    std::vector<BetaParams> cond;

    int K() const { return int(tau.size()); }

    void validate() const {
        if (tau.size() != mass.size() || tau.size() != cond.size() || tau.empty())
            throw std::invalid_argument("DiscreteTauModel: inconsistent sizes");
    }

    double cond_pdf(int k, double x) const { return beta_pdf(cond[k], x); }
    double cond_cdf(int k, double x) const { return beta_cdf(cond[k], x); }

    // Density of the top order statistic of m draws, f_{m:m}.
    double top_os_pdf(int k, int m, double x) const {
        double v = cond_pdf(k, x);
        if (m > 1) v *= double(m) * std::pow(cond_cdf(k, x), double(m - 1));
        return v;
    }
    // Density of the bottom order statistic of q draws, f_{1:q}.
    double bottom_os_pdf(int k, int q, double x) const {
        double v = cond_pdf(k, x);
        if (q > 1) v *= double(q) * std::pow(1.0 - cond_cdf(k, x), double(q - 1));
        return v;
    }

    double marg_x_cdf(double x) const {
        double s = 0.0;
        for (int k = 0; k < K(); ++k) s += mass[k] * cond_cdf(k, x);
        return s;
    }

    double total_mass() const { return std::accumulate(mass.begin(), mass.end(), 0.0); }
};

// Canonical four-point test model with well-separated conditionals.
inline DiscreteTauModel demo_model_k4() {
    DiscreteTauModel m;
    m.tau = {0.2, 0.4, 0.6, 0.8};
    m.mass = {0.1, 0.2, 0.3, 0.4};
    m.cond = {BetaParams(2.0, 5.0), BetaParams(3.0, 4.0), BetaParams(4.0, 3.0),
              BetaParams(5.0, 2.0)};
    return m;
}

// Quadrature-node discretization of the synthetic DGP (continuous-tau mode,
// used for convergence curves only).
inline DiscreteTauModel quadrature_model(const SyntheticDgp& dgp, int K) {
    const auto rule = gauss_legendre(K);
    DiscreteTauModel m;
    for (int k = 0; k < K; ++k) {
        m.tau.push_back(rule.nodes[k]);
        m.mass.push_back(rule.weights[k] * dgp.marg_t_pdf(rule.nodes[k]));
        m.cond.emplace_back(dgp.cond_alpha(rule.nodes[k]), dgp.cond_beta(rule.nodes[k]));
    }
    return m;
}

// Uniform closed grid on one segment, endpoints included.
struct SegmentGrid {
    std::vector<double> pts;
    double h = 0.0;

    static SegmentGrid uniform(double lo, double hi, int n) {
        if (n < 3) throw std::invalid_argument("SegmentGrid: need at least 3 points");
        SegmentGrid g;
        g.h = (hi - lo) / (n - 1);
        g.pts.resize(n);
        for (int i = 0; i < n; ++i) g.pts[i] = lo + g.h * i;
        g.pts.back() = hi;
        return g;
    }

    int size() const { return int(pts.size()); }

    std::vector<double> trapezoid_weights() const {
        std::vector<double> w(pts.size(), h);
        w.front() = 0.5 * h;
        w.back() = 0.5 * h;
        return w;
    }
};

struct OperatorGrid {
    Partition partition;
    SegmentGrid low, mid, high;

    static OperatorGrid make(const Partition& part, int n_low = 321, int n_mid = 161,
                             int n_high = 321) {
        return OperatorGrid{part, SegmentGrid::uniform(0.0, part.c1, n_low),
                            SegmentGrid::uniform(part.c1, part.c2, n_mid),
                            SegmentGrid::uniform(part.c2, 1.0, n_high)};
    }
};

// Cutoffs at the 1/3 and 2/3 quantiles of the marginal bid distribution.
inline Partition default_partition(const DiscreteTauModel& model) {
    const double total = model.total_mass();
    auto q = [&](double p) {
        return bisect([&](double x) { return model.marg_x_cdf(x) / total - p; }, 0.0, 1.0);
    };
    return Partition(q(1.0 / 3.0), q(2.0 / 3.0));
}

// Direct evaluation of the unconditional triple density at
// (x, y, z) for ranks (r-2, r-1, r) of n: the mixture sum over tau points.
inline double joint_triple_value(const DiscreteTauModel& model, double x, double y, double z,
                                 int r, int n) {
    const double c = std::exp(std::lgamma(n + 1.0) - std::lgamma(r - 1.0) - std::lgamma(n - r + 2.0));
    double s = 0.0;
    for (int k = 0; k < model.K(); ++k)
        s += model.top_os_pdf(k, r - 2, x) * model.cond_pdf(k, y) *
             model.bottom_os_pdf(k, n - r + 1, z) * model.mass[k];
    return c * s;
}

// Unconditional pair density of ranks (r-1, r) of n at (x, z), x <= z.
inline double joint_pair_value(const DiscreteTauModel& model, double x, double z, int r, int n) {
    const double c = std::exp(std::lgamma(n + 1.0) - std::lgamma(double(r)) - std::lgamma(n - r + 2.0));
    double s = 0.0;
    for (int k = 0; k < model.K(); ++k)
        s += model.top_os_pdf(k, r - 1, x) * model.bottom_os_pdf(k, n - r + 1, z) * model.mass[k];
    return c * s;
}

// Discretized operators for one evaluation point y in the middle segment.
struct DiscreteOperators {
    Eigen::MatrixXd L;      // n_low x K, kernel f_{r-2:r-2}(x_a | tau_k)
    Eigen::MatrixXd H;      // K x n_high, kernel times z-cell weight
    Eigen::VectorXd Delta;  // K, c_{r,n} f(y | tau_k) mass_k
    Eigen::MatrixXd J;      // n_low x n_high, joint density times z-cell weight
    double y = 0.0;
    int r = 0, n = 0;
};

inline DiscreteOperators build_operators(const DiscreteTauModel& model, const OperatorGrid& grid,
                                         double y, int r, int n) {
    model.validate();
    if (r < 3 || r > n) throw std::out_of_range("build_operators: need 3 <= r <= n");
    if (y < grid.partition.c1 || y > grid.partition.c2)
        throw std::domain_error("build_operators: y must lie in the middle segment");
    const int K = model.K();
    const int nl = grid.low.size(), nh = grid.high.size();
    const auto wz = grid.high.trapezoid_weights();
    const double c = std::exp(std::lgamma(n + 1.0) - std::lgamma(r - 1.0) - std::lgamma(n - r + 2.0));

    DiscreteOperators ops;
    ops.y = y;
    ops.r = r;
    ops.n = n;
    ops.L.resize(nl, K);
    ops.H.resize(K, nh);
    ops.Delta.resize(K);
    ops.J.resize(nl, nh);
    for (int k = 0; k < K; ++k) {
        for (int a = 0; a < nl; ++a) ops.L(a, k) = model.top_os_pdf(k, r - 2, grid.low.pts[a]);
        for (int cix = 0; cix < nh; ++cix)
            ops.H(k, cix) = model.bottom_os_pdf(k, n - r + 1, grid.high.pts[cix]) * wz[cix];
        ops.Delta(k) = c * model.cond_pdf(k, y) * model.mass[k];
    }
    // J built from the joint triple density itself, independently of L, H.
    for (int a = 0; a < nl; ++a)
        for (int cix = 0; cix < nh; ++cix)
            ops.J(a, cix) =
                joint_triple_value(model, grid.low.pts[a], y, grid.high.pts[cix], r, n) * wz[cix];
    return ops;
}

inline double check_factorization(const DiscreteOperators& ops) {
    const Eigen::MatrixXd lhs = ops.L * ops.Delta.asDiagonal() * ops.H;
    return (ops.J - lhs).cwiseAbs().maxCoeff();
}

// Kernel matrix of the joint triple density with x on the rows: rows over
// the low grid, columns over the high grid, column weights attached. The
// high-segment decomposition uses its transpose with low weights instead.
inline Eigen::MatrixXd joint_matrix_low_to_high(const DiscreteTauModel& model,
                                                const OperatorGrid& grid, double y, int r, int n) {
    const auto wz = grid.high.trapezoid_weights();
    Eigen::MatrixXd J(grid.low.size(), grid.high.size());
    for (int a = 0; a < grid.low.size(); ++a)
        for (int c = 0; c < grid.high.size(); ++c)
            J(a, c) = joint_triple_value(model, grid.low.pts[a], y, grid.high.pts[c], r, n) * wz[c];
    return J;
}

inline Eigen::MatrixXd joint_matrix_high_to_low(const DiscreteTauModel& model,
                                                const OperatorGrid& grid, double y, int r, int n) {
    const auto wx = grid.low.trapezoid_weights();
    Eigen::MatrixXd J(grid.high.size(), grid.low.size());
    for (int c = 0; c < grid.high.size(); ++c)
        for (int a = 0; a < grid.low.size(); ++a)
            J(c, a) = joint_triple_value(model, grid.low.pts[a], y, grid.high.pts[c], r, n) * wx[a];
    return J;
}

// Minimum pairwise gap of the eigenvalue ratios f(y1|tau)/f(y2|tau) in the
// test model; a vanishing gap means the distinctness condition fails at
// this (y1, y2) pair.
inline double distinct_ratio_gap(const DiscreteTauModel& model, double y1, double y2) {
    std::vector<double> ratios;
    for (int k = 0; k < model.K(); ++k)
        ratios.push_back(model.cond_pdf(k, y1) / model.cond_pdf(k, y2));
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ratios.size(); ++i)
        for (std::size_t j = i + 1; j < ratios.size(); ++j)
            gap = std::min(gap, std::abs(ratios[i] - ratios[j]));
    return gap;
}

struct EigRecovery {
    Eigen::VectorXd eigenvalues;  // sorted descending
    Eigen::MatrixXd vectors;      // one column per eigenvalue, on the row grid of J1
    double cond_J2 = 0.0;
    int rank = 0;
};

// Eigen-decomposition of J1 pinv(J2), restricted to the numerical column
// space of J2. The pseudo-inverse truncates singular values below
// sv_rel_tol * sigma_max; eigenvalue gaps below gap_tol flag an ambiguous
// decomposition.
inline EigRecovery eig_recover(const Eigen::MatrixXd& J1, const Eigen::MatrixXd& J2,
                               double gap_tol = 1e-8, double sv_rel_tol = 1e-12) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(J2, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double smax = sv(0);
    int rank = 0;
    while (rank < sv.size() && sv(rank) > sv_rel_tol * smax) ++rank;
    if (rank == 0) throw IdentificationError("eig_recover: J2 is numerically zero");

    const Eigen::MatrixXd U = svd.matrixU().leftCols(rank);
    const Eigen::MatrixXd V = svd.matrixV().leftCols(rank);
    const Eigen::VectorXd sinv = sv.head(rank).cwiseInverse();
    const Eigen::MatrixXd B = U.transpose() * J1 * V * sinv.asDiagonal();

    Eigen::EigenSolver<Eigen::MatrixXd> es(B);
    if (es.info() != Eigen::Success)
        throw IdentificationError("eig_recover: eigen-decomposition failed");

    std::vector<int> order(rank);
    std::iota(order.begin(), order.end(), 0);
    const auto& ev = es.eigenvalues();
    for (int i = 0; i < rank; ++i)
        if (std::abs(ev(i).imag()) > 1e-8 * (1.0 + std::abs(ev(i).real())))
            throw IdentificationError("eig_recover: complex eigenvalues, decomposition ambiguous");
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return ev(a).real() > ev(b).real(); });

    EigRecovery out;
    out.rank = rank;
    out.cond_J2 = smax / sv(rank - 1);
    out.eigenvalues.resize(rank);
    out.vectors.resize(J1.rows(), rank);
    const Eigen::MatrixXd lift = es.eigenvectors().real();
    for (int i = 0; i < rank; ++i) {
        out.eigenvalues(i) = ev(order[i]).real();
        out.vectors.col(i) = U * lift.col(order[i]);
    }
    for (int i = 0; i + 1 < rank; ++i)
        if (std::abs(out.eigenvalues(i) - out.eigenvalues(i + 1)) < gap_tol)
            throw IdentificationError(
                "eig_recover: eigenvalue gap below tolerance, distinctness violated numerically");
    return out;
}

// Flips an eigenvector to its majority sign and normalizes it to unit
// integral over its segment. Returns the residual negative mass fraction.
inline double nonnegativize_normalize(Eigen::VectorXd& v, double h) {
    double pos = 0.0, neg = 0.0;
    for (int i = 0; i < v.size(); ++i) (v(i) >= 0.0 ? pos : neg) += std::abs(v(i));
    if (neg > pos) v = -v;
    std::vector<double> vals(v.data(), v.data() + v.size());
    const double total = segment_integral(vals, h);
    if (!(std::abs(total) > 0.0))
        throw IdentificationError("nonnegativize_normalize: eigenvector has zero mass");
    v /= total;
    double neg_mass = 0.0;
    for (int i = 0; i < v.size(); ++i) neg_mass += std::max(0.0, -v(i)) * h;
    return neg_mass;
}

struct SegmentRecovery {
    std::vector<double> F;  // conditional CDF on the segment, up to scale
    std::vector<double> f;  // parent density on the segment, up to scale
};

// The power-map density c^{e-1} * v loses all relative accuracy where the
// cumulative integral c is at roundoff scale. Replace those points (and the
// matching tail case) with finite differences of the recovered CDF, which
// stays stable.
inline void detail_replace_unstable_density(SegmentRecovery& seg, const std::vector<double>& cum,
                                            double h, bool from_right = false) {
    const std::size_t n = seg.f.size();
    if (n < 3) return;
    const double total = std::abs(cum.back()) > 0.0 ? std::abs(cum.back()) : 1.0;
    auto fd = [&](std::size_t i) {
        if (i == 0) return (-3.0 * seg.F[0] + 4.0 * seg.F[1] - seg.F[2]) / (2.0 * h);
        if (i + 1 == n) return (3.0 * seg.F[n - 1] - 4.0 * seg.F[n - 2] + seg.F[n - 3]) / (2.0 * h);
        return (seg.F[i + 1] - seg.F[i - 1]) / (2.0 * h);
    };
    for (std::size_t i = 0; i < n; ++i) {
        const double level = from_right ? total - cum[i] : cum[i];
        if (level < 1e-6 * total) seg.f[i] = std::max(0.0, fd(i));
    }
}

// Parent recovery on the low segment: F = [cumulative integral]^{1/(r-2)}.
// The eigenvector must hold (a scaled) f_{r-2:r-2}(. | tau) on the grid.
inline SegmentRecovery recover_parent_low(const Eigen::VectorXd& eigvec, double h, int r,
                                          double neg_tol = 1e-8) {
    if (r < 3) throw std::out_of_range("recover_parent_low: need r >= 3");
    Eigen::VectorXd v = eigvec;
    const double neg_mass = nonnegativize_normalize(v, h);
    if (neg_mass > neg_tol)
        throw IdentificationError("recover_parent_low: eigenvector carries negative mass " +
                                  std::to_string(neg_mass));
    std::vector<double> vals(v.data(), v.data() + v.size());
    const auto cum = cumulative_integral(vals, h);
    const double e = 1.0 / double(r - 2);
    SegmentRecovery out;
    out.F.resize(vals.size());
    out.f.resize(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const double c = std::max(0.0, cum[i]);
        out.F[i] = std::pow(c, e);
        out.f[i] = (r == 3) ? vals[i] : (c > 0.0 ? e * std::pow(c, e - 1.0) * vals[i] : 0.0);
    }
    if (r > 3) detail_replace_unstable_density(out, cum, h);
    return out;
}

// Parent recovery on the high segment through the survival integral:
// F = 1 - [int_x^1 f_{1:n-r+1}]^{1/(n-r+1)}.
inline SegmentRecovery recover_parent_high(const Eigen::VectorXd& eigvec, double h, int n, int r,
                                           double neg_tol = 1e-8) {
    const int q = n - r + 1;
    if (q < 1) throw std::out_of_range("recover_parent_high: need r <= n");
    Eigen::VectorXd v = eigvec;
    const double neg_mass = nonnegativize_normalize(v, h);
    if (neg_mass > neg_tol)
        throw IdentificationError("recover_parent_high: eigenvector carries negative mass " +
                                  std::to_string(neg_mass));
    std::vector<double> vals(v.data(), v.data() + v.size());
    // Integrate the tail directly on the reversed grid; the subtraction
    // total - cum would wipe out the tiny survival values near the edge.
    std::vector<double> rev(vals.rbegin(), vals.rend());
    const auto rcum = cumulative_integral(rev, h);
    const double e = 1.0 / double(q);
    const std::size_t nn = vals.size();
    SegmentRecovery out;
    out.F.resize(nn);
    out.f.resize(nn);
    std::vector<double> tail_fwd(nn);
    for (std::size_t i = 0; i < nn; ++i) {
        const double tail = std::max(0.0, rcum[nn - 1 - i]);
        tail_fwd[i] = tail;
        out.F[i] = 1.0 - std::pow(tail, e);
        out.f[i] = (q == 1) ? vals[i] : (tail > 0.0 ? e * std::pow(tail, e - 1.0) * vals[i] : 0.0);
    }
    if (q > 1) {
        // Reuse the left-edge stabilizer on the mirrored cumulative.
        std::vector<double> cum_like(nn);
        for (std::size_t i = 0; i < nn; ++i) cum_like[i] = rcum.back() - tail_fwd[i];
        detail_replace_unstable_density(out, cum_like, h, /*from_right=*/true);
    }
    return out;
}

struct MiddleRecovery {
    Eigen::MatrixXd density;  // n_mid x K, f(y|tau_k) f^T(tau_k) up to per-k scale
    double max_offdiag_ratio = 0.0;
    double cond_L = 0.0, cond_H = 0.0;
};

// Step 3: extract the diagonal of pinv(L_rec) J_y pinv(H_rec) for every y on
// the middle grid. L_rec columns and H_rec rows are the (scaled) recovered
// kernels from steps 1-2; H_rec must carry the high-grid cell weights.
// J_y factors as top diag(c f(y|tau) mass) bot^T over the model's latent
// points, so the y-loop only needs the projected K x K pieces.
inline MiddleRecovery recover_middle(const DiscreteTauModel& model, const OperatorGrid& grid,
                                     const Eigen::MatrixXd& L_rec, const Eigen::MatrixXd& H_rec,
                                     int r, int n, double cond_limit = 1e10) {
    const int K = int(L_rec.cols());
    const int Km = model.K();
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> codL(L_rec);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> codH(H_rec);
    const Eigen::MatrixXd pinvL = codL.pseudoInverse();
    const Eigen::MatrixXd pinvH = codH.pseudoInverse();

    Eigen::JacobiSVD<Eigen::MatrixXd> svdL(L_rec);
    Eigen::JacobiSVD<Eigen::MatrixXd> svdH(H_rec);
    MiddleRecovery out;
    out.cond_L = svdL.singularValues()(0) / svdL.singularValues().tail(1)(0);
    out.cond_H = svdH.singularValues()(0) / svdH.singularValues().tail(1)(0);
    if (out.cond_L > cond_limit || out.cond_H > cond_limit)
        throw IdentificationError("recover_middle: recovered operators ill-conditioned (cond > " +
                                  std::to_string(cond_limit) + ")");

    const double c_rn =
        std::exp(std::lgamma(n + 1.0) - std::lgamma(r - 1.0) - std::lgamma(n - r + 2.0));
    Eigen::MatrixXd top(grid.low.size(), Km);
    Eigen::MatrixXd bot(Km, grid.high.size());
    const auto wz = grid.high.trapezoid_weights();
    for (int k = 0; k < Km; ++k) {
        for (int a = 0; a < grid.low.size(); ++a)
            top(a, k) = model.top_os_pdf(k, r - 2, grid.low.pts[a]);
        for (int c = 0; c < grid.high.size(); ++c)
            bot(k, c) = model.bottom_os_pdf(k, n - r + 1, grid.high.pts[c]) * wz[c];
    }
    const Eigen::MatrixXd left = pinvL * top;    // K x Km
    const Eigen::MatrixXd right = bot * pinvH;   // Km x K

    out.density.resize(grid.mid.size(), K);
    Eigen::VectorXd dvec(Km);
    for (int j = 0; j < grid.mid.size(); ++j) {
        for (int k = 0; k < Km; ++k)
            dvec(k) = c_rn * model.cond_pdf(k, grid.mid.pts[j]) * model.mass[k];
        const Eigen::MatrixXd D = left * dvec.asDiagonal() * right;
        double diag_mass = 0.0, off_mass = 0.0;
        for (int a = 0; a < K; ++a)
            for (int b = 0; b < K; ++b)
                (a == b ? diag_mass : off_mass) += std::abs(D(a, b));
        out.max_offdiag_ratio = std::max(out.max_offdiag_ratio, off_mass / diag_mass);
        for (int k = 0; k < K; ++k) out.density(j, k) = D(k, k);
    }
    return out;
}

struct PinnedScales {
    double s_low = 1.0, s_mid = 1.0, s_high = 1.0;
};

// Step 4 linear system per latent point: continuity at both cutoffs plus
// unit total probability. Segment masses may be supplied exactly (the
// recovery maps know them in closed form as powers of their cumulative
// integrals); otherwise they are taken by Simpson.
inline PinnedScales pin_scales(const std::vector<double>& f_low, const std::vector<double>& f_mid,
                               const std::vector<double>& f_high, const OperatorGrid& grid,
                               double Il = -1.0, double Im = -1.0, double Ih = -1.0) {
    if (Il < 0.0) Il = segment_integral(f_low, grid.low.h);
    if (Im < 0.0) Im = segment_integral(f_mid, grid.mid.h);
    if (Ih < 0.0) Ih = segment_integral(f_high, grid.high.h);
    Eigen::Matrix3d A;
    Eigen::Vector3d b;
    A << f_low.back(), -f_mid.front(), 0.0,
         0.0, f_mid.back(), -f_high.front(),
         Il, Im, Ih;
    b << 0.0, 0.0, 1.0;
    Eigen::FullPivLU<Eigen::Matrix3d> lu(A);
    if (!lu.isInvertible())
        throw IdentificationError(
            "pin_scales: singular system (zero density at a cutoff); move the partition");
    const Eigen::Vector3d s = lu.solve(b);
    return PinnedScales{s(0), s(1), s(2)};
}

// One latent point's fully pinned conditional on the stitched global grid.
struct FullConditional {
    std::vector<double> x;  // low + mid + high grid, cutpoints deduplicated
    std::vector<double> f;
    std::vector<double> F;

    // Trapezoid on the stitched grid; only relative comparisons matter for
    // the ordering step.
    double mean() const {
        double m = 0.0;
        for (std::size_t i = 1; i < x.size(); ++i)
            m += 0.5 * (x[i] * f[i] + x[i - 1] * f[i - 1]) * (x[i] - x[i - 1]);
        return m;
    }
};

inline FullConditional stitch_segments(const OperatorGrid& grid, const std::vector<double>& f_low,
                                       const std::vector<double>& f_mid,
                                       const std::vector<double>& f_high,
                                       const PinnedScales& s) {
    FullConditional out;
    const int nl = grid.low.size(), nm = grid.mid.size(), nh = grid.high.size();
    out.x.reserve(nl + nm + nh - 2);
    out.f.reserve(nl + nm + nh - 2);
    for (int i = 0; i < nl; ++i) {
        out.x.push_back(grid.low.pts[i]);
        out.f.push_back(s.s_low * f_low[i]);
    }
    // Average the duplicated cutoff values; after pinning they agree up to
    // numerical error.
    out.f.back() = 0.5 * (out.f.back() + s.s_mid * f_mid.front());
    for (int i = 1; i < nm; ++i) {
        out.x.push_back(grid.mid.pts[i]);
        out.f.push_back(s.s_mid * f_mid[i]);
    }
    out.f.back() = 0.5 * (out.f.back() + s.s_high * f_high.front());
    for (int i = 1; i < nh; ++i) {
        out.x.push_back(grid.high.pts[i]);
        out.f.push_back(s.s_high * f_high[i]);
    }
    // CDF by per-segment cumulative Simpson, chained across the cutpoints.
    std::vector<double> seg_low(out.f.begin(), out.f.begin() + nl);
    std::vector<double> seg_mid(out.f.begin() + nl - 1, out.f.begin() + nl - 1 + nm);
    std::vector<double> seg_high(out.f.begin() + nl + nm - 2, out.f.end());
    const auto cl = cumulative_integral(seg_low, grid.low.h);
    const auto cm = cumulative_integral(seg_mid, grid.mid.h);
    const auto ch = cumulative_integral(seg_high, grid.high.h);
    out.F.resize(out.x.size());
    for (int i = 0; i < nl; ++i) out.F[i] = cl[i];
    for (int i = 1; i < nm; ++i) out.F[nl - 1 + i] = cl.back() + cm[i];
    for (int i = 1; i < nh; ++i) out.F[nl + nm - 2 + i] = cl.back() + cm.back() + ch[i];
    return out;
}

// Pipeline variant: the low and high CDFs come from the recovery maps
// directly (power of the cumulative), avoiding a second pass of numerical
// integration through the segment edges.
inline FullConditional stitch_recovered(const OperatorGrid& grid, const SegmentRecovery& low,
                                        const std::vector<double>& f_mid,
                                        const SegmentRecovery& high, const PinnedScales& s) {
    FullConditional out;
    const int nl = grid.low.size(), nm = grid.mid.size(), nh = grid.high.size();
    out.x.reserve(nl + nm + nh - 2);
    out.f.reserve(nl + nm + nh - 2);
    out.F.reserve(nl + nm + nh - 2);
    const double mass_low = s.s_low * low.F.back();
    for (int i = 0; i < nl; ++i) {
        out.x.push_back(grid.low.pts[i]);
        out.f.push_back(s.s_low * low.f[i]);
        out.F.push_back(s.s_low * low.F[i]);
    }
    out.f.back() = 0.5 * (out.f.back() + s.s_mid * f_mid.front());
    std::vector<double> scaled_mid(f_mid);
    for (auto& v : scaled_mid) v *= s.s_mid;
    const auto cm = cumulative_integral(scaled_mid, grid.mid.h);
    for (int i = 1; i < nm; ++i) {
        out.x.push_back(grid.mid.pts[i]);
        out.f.push_back(scaled_mid[i]);
        out.F.push_back(mass_low + cm[i]);
    }
    out.f.back() = 0.5 * (out.f.back() + s.s_high * high.f.front());
    for (int i = 1; i < nh; ++i) {
        out.x.push_back(grid.high.pts[i]);
        out.f.push_back(s.s_high * high.f[i]);
        out.F.push_back(1.0 - s.s_high * (1.0 - high.F[i]));
    }
    return out;
}

// Step 4b: order latent points by conditional mean (strict monotonicity of
// E[X|tau] is the ordering device). Returns the permutation old -> sorted.
inline std::vector<int> order_and_locate(const std::vector<FullConditional>& conds,
                                         double tie_tol = 1e-10) {
    std::vector<double> means;
    for (const auto& c : conds) means.push_back(c.mean());
    std::vector<int> perm(conds.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](int a, int b) { return means[a] < means[b]; });
    for (std::size_t i = 0; i + 1 < perm.size(); ++i)
        if (std::abs(means[perm[i]] - means[perm[i + 1]]) < tie_tol)
            throw IdentificationError("order_and_locate: conditional means tie, ordering ambiguous");
    return perm;
}

// Step 5: masses from the pair density of ranks (r-1, r). The kernels on
// both sides are the pinned conditionals, so the extracted diagonal equals
// c^1_{r,n} times the masses.
inline std::vector<double> recover_marginal(const DiscreteTauModel& model,
                                            const OperatorGrid& grid,
                                            const std::vector<FullConditional>& conds, int r,
                                            int n, double cond_limit = 1e10) {
    const int K = int(conds.size());
    const int nl = grid.low.size(), nm = grid.mid.size(), nh = grid.high.size();
    const int nlm = nl + nm - 1;  // low + mid stitched grid
    Eigen::MatrixXd Lpin(nlm, K);
    Eigen::MatrixXd Hpin(K, nh);
    const auto wz = grid.high.trapezoid_weights();
    for (int k = 0; k < K; ++k) {
        const auto& c = conds[k];
        for (int a = 0; a < nlm; ++a) {
            double v = c.f[a];
            if (r > 2) v *= double(r - 1) * std::pow(c.F[a], double(r - 2));
            Lpin(a, k) = v;
        }
        for (int j = 0; j < nh; ++j) {
            const int idx = nlm - 1 + j;
            double v = c.f[idx];
            const int q = n - r + 1;
            if (q > 1) v *= double(q) * std::pow(std::max(0.0, 1.0 - c.F[idx]), double(q - 1));
            Hpin(k, j) = v * wz[j];
        }
    }
    Eigen::MatrixXd Kmat(nlm, nh);
    for (int a = 0; a < nlm; ++a)
        for (int j = 0; j < nh; ++j)
            Kmat(a, j) = joint_pair_value(model, conds[0].x[a], grid.high.pts[j], r, n) * wz[j];

    Eigen::JacobiSVD<Eigen::MatrixXd> svdL(Lpin);
    Eigen::JacobiSVD<Eigen::MatrixXd> svdH(Hpin);
    if (svdL.singularValues()(0) / svdL.singularValues().tail(1)(0) > cond_limit ||
        svdH.singularValues()(0) / svdH.singularValues().tail(1)(0) > cond_limit)
        throw IdentificationError("recover_marginal: pinned operators ill-conditioned");

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> codL(Lpin);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> codH(Hpin);
    const Eigen::MatrixXd D = codL.pseudoInverse() * Kmat * codH.pseudoInverse();
    std::vector<double> masses(K);
    double total = 0.0;
    for (int k = 0; k < K; ++k) {
        masses[k] = D(k, k);
        total += masses[k];
    }
    for (auto& m : masses) m /= total;
    return masses;
}

// Corollary-style moment recovery: P_N = A m_N with A upper triangular,
// A[n][i] = C(N-n, i-n) C(N, n) (-1)^{i-n}. Solved by back substitution.
inline std::vector<double> recover_truncation_moments(const std::vector<double>& P, int N) {
    if (int(P.size()) != N) throw std::invalid_argument("recover_truncation_moments: |P| != N");
    auto choose = [](int a, int b) {
        if (b < 0 || b > a) return 0.0;
        return std::exp(std::lgamma(a + 1.0) - std::lgamma(b + 1.0) - std::lgamma(a - b + 1.0));
    };
    std::vector<double> m(N, 0.0);
    for (int n = N; n >= 1; --n) {
        double acc = P[n - 1];
        for (int i = n + 1; i <= N; ++i) {
            const double Ani = choose(N - n, i - n) * choose(N, n) *
                               ((i - n) % 2 == 0 ? 1.0 : -1.0);
            acc -= Ani * m[i - 1];
        }
        m[n - 1] = acc / choose(N, n);
    }
    return m;
}

struct MatrixDiagnostic {
    std::string name;
    double sigma_min = 0.0, sigma_max = 0.0, cond = 0.0;
    bool flagged = false;
};

// Conditioning is measured over the latent rank K: a healthy model keeps
// all K leading singular values away from zero, while a completeness
// failure (X independent of the latent point) collapses them.
inline std::vector<MatrixDiagnostic> injectivity_diagnostics(const DiscreteOperators& ops,
                                                             double cond_limit = 1e10) {
    const int K = int(ops.Delta.size());
    auto diag = [&](const std::string& name, const Eigen::MatrixXd& M) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
        const auto& sv = svd.singularValues();
        const int k_eff = std::min<int>(K, int(sv.size()));
        MatrixDiagnostic d;
        d.name = name;
        d.sigma_max = sv(0);
        d.sigma_min = sv(k_eff - 1);
        d.cond = d.sigma_min > 0.0 ? d.sigma_max / d.sigma_min
                                   : std::numeric_limits<double>::infinity();
        d.flagged = d.cond > cond_limit;
        return d;
    };
    return {diag("L", ops.L), diag("H", ops.H), diag("J_y", ops.J)};
}

// End-to-end Theorem 1 pipeline on a discrete-tau model.
struct PipelineOptions {
    double y1, y2;
    int r, n;
    double gap_tol = 1e-8;
    double cond_limit = 1e10;
};

struct PipelineResult {
    std::vector<FullConditional> conditionals;  // ordered by conditional mean
    std::vector<double> masses;                 // same order
    std::vector<int> permutation;               // raw eigen order -> mean order
    Eigen::VectorXd eigenvalues;
    double factorization_error = 0.0;
    double max_offdiag_ratio = 0.0;
    double cond_J2 = 0.0;
    double min_ratio_gap = 0.0;
};

inline PipelineResult run_identification(const DiscreteTauModel& model, const OperatorGrid& grid,
                                         const PipelineOptions& opt) {
    model.validate();
    PipelineResult out;
    out.min_ratio_gap = distinct_ratio_gap(model, opt.y1, opt.y2);

    const auto ops1 = build_operators(model, grid, opt.y1, opt.r, opt.n);
    const auto ops2 = build_operators(model, grid, opt.y2, opt.r, opt.n);
    out.factorization_error =
        std::max(check_factorization(ops1), check_factorization(ops2));

    // Step 1: low-segment eigenvectors.
    const auto low_dec = eig_recover(ops1.J, ops2.J, opt.gap_tol);
    out.cond_J2 = low_dec.cond_J2;
    out.eigenvalues = low_dec.eigenvalues;
    const int K = low_dec.rank;

    // Step 2: high-segment eigenvectors from the transposed operators, then
    // tau-matching by eigenvalue proximity.
    const auto J1t = joint_matrix_high_to_low(model, grid, opt.y1, opt.r, opt.n);
    const auto J2t = joint_matrix_high_to_low(model, grid, opt.y2, opt.r, opt.n);
    const auto high_dec = eig_recover(J1t, J2t, opt.gap_tol);
    if (high_dec.rank != K)
        throw IdentificationError("run_identification: rank mismatch between decompositions");
    std::vector<int> match(K);
    for (int i = 0; i < K; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j < K; ++j) {
            const double d = std::abs(low_dec.eigenvalues(i) - high_dec.eigenvalues(j));
            if (d < best) {
                best = d;
                match[i] = j;
            }
        }
    }

    // Parent recovery per latent point, then middle extraction.
    std::vector<SegmentRecovery> lows(K), highs(K);
    Eigen::MatrixXd L_rec(grid.low.size(), K);
    Eigen::MatrixXd H_rec(K, grid.high.size());
    const auto wz = grid.high.trapezoid_weights();
    for (int k = 0; k < K; ++k) {
        Eigen::VectorXd vl = low_dec.vectors.col(k);
        nonnegativize_normalize(vl, grid.low.h);
        L_rec.col(k) = vl;
        lows[k] = recover_parent_low(vl, grid.low.h, opt.r);
        Eigen::VectorXd vh = high_dec.vectors.col(match[k]);
        nonnegativize_normalize(vh, grid.high.h);
        for (int c = 0; c < grid.high.size(); ++c) H_rec(k, c) = vh(c) * wz[c];
        highs[k] = recover_parent_high(vh, grid.high.h, opt.n, opt.r);
    }
    const auto middle = recover_middle(model, grid, L_rec, H_rec, opt.r, opt.n, opt.cond_limit);
    out.max_offdiag_ratio = middle.max_offdiag_ratio;

    // Steps 4-5: pin scales, stitch, order by conditional mean, recover
    // the marginal masses.
    std::vector<FullConditional> conds(K);
    for (int k = 0; k < K; ++k) {
        std::vector<double> f_mid(grid.mid.size());
        for (int j = 0; j < grid.mid.size(); ++j) f_mid[j] = middle.density(j, k);
        // Middle extraction can inherit the eigenvector's sign only through
        // pinned positives; flip if needed.
        double tot = 0.0;
        for (double v : f_mid) tot += v;
        if (tot < 0.0)
            for (auto& v : f_mid) v = -v;
        // Low and high segment masses in closed form: F at c1, survival at c2.
        const auto scales = pin_scales(lows[k].f, f_mid, highs[k].f, grid, lows[k].F.back(),
                                       -1.0, 1.0 - highs[k].F.front());
        conds[k] = stitch_recovered(grid, lows[k], f_mid, highs[k], scales);
    }
    out.permutation = order_and_locate(conds);
    for (int k = 0; k < K; ++k) out.conditionals.push_back(conds[out.permutation[k]]);
    out.masses = recover_marginal(model, grid, out.conditionals, opt.r, opt.n, opt.cond_limit);
    return out;
}

}  // namespace osuh
