#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "osuh/ident_lab.hpp"
#include "osuh/order_stats.hpp"

using Catch::Approx;
using namespace osuh;

namespace {

DiscreteTauModel single_point_model() {
    DiscreteTauModel m;
    m.tau = {0.5};
    m.mass = {1.0};
    m.cond = {BetaParams(2.0, 3.0)};
    return m;
}

// X independent of the latent point: every conditional identical.
DiscreteTauModel independent_model(int K) {
    DiscreteTauModel m;
    for (int k = 0; k < K; ++k) {
        m.tau.push_back((k + 1.0) / (K + 1.0));
        m.mass.push_back(1.0 / K);
        m.cond.emplace_back(2.0, 2.0);
    }
    return m;
}

DiscreteTauModel uniform_conditional_model(int K) {
    DiscreteTauModel m;
    for (int k = 0; k < K; ++k) {
        m.tau.push_back((k + 1.0) / (K + 1.0));
        m.mass.push_back(1.0 / K);
        m.cond.emplace_back(1.0, 1.0);
    }
    return m;
}

}  // namespace

TEST_CASE("build_operators: K=1 gives a rank-one outer product", "[ident]") {
    const auto model = single_point_model();
    const auto grid = OperatorGrid::make(Partition(0.35, 0.65), 41, 41, 41);
    const auto ops = build_operators(model, grid, 0.5, 3, 4);
    REQUIRE(ops.Delta.size() == 1);
    const Eigen::MatrixXd outer = ops.L * ops.Delta.asDiagonal() * ops.H;
    REQUIRE((ops.J - outer).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("build_operators: tau-invariant conditionals give identical L columns", "[ident]") {
    const auto model = uniform_conditional_model(3);
    const auto grid = OperatorGrid::make(Partition(0.3, 0.7), 31, 31, 31);
    const auto ops = build_operators(model, grid, 0.5, 3, 4);
    for (int k = 1; k < 3; ++k)
        REQUIRE((ops.L.col(k) - ops.L.col(0)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("build_operators: J matches a longhand mixture evaluation", "[ident]") {
    const auto model = demo_model_k4();
    const auto grid = OperatorGrid::make(Partition(0.35, 0.6), 21, 21, 21);
    const auto ops = build_operators(model, grid, 0.5, 4, 6);
    const auto wz = grid.high.trapezoid_weights();
    const double x = grid.low.pts[7], z = grid.high.pts[11], y = 0.5;
    double expect = 0.0;
    for (int k = 0; k < 4; ++k) {
        const double F = model.cond_cdf(k, x);
        const double Sz = 1.0 - model.cond_cdf(k, z);
        // ranks (2,3,4) of 6: f_{2:2}(x) f(y) f_{1:3}(z).
        expect += 2.0 * F * model.cond_pdf(k, x) * model.cond_pdf(k, y) * 3.0 * Sz * Sz *
                  model.cond_pdf(k, z) * model.mass[k];
    }
    const double c_rn = std::exp(std::lgamma(7.0) - std::lgamma(3.0) - std::lgamma(4.0));
    REQUIRE(ops.J(7, 11) == Approx(c_rn * expect * wz[11]).epsilon(1e-12));
}

TEST_CASE("check_factorization: exact identity, K-node convergence, sensitivity", "[ident]") {
    const auto grid = OperatorGrid::make(Partition(0.3, 0.55), 61, 61, 61);

    SECTION("discrete models satisfy the identity to machine precision") {
        for (int K : {1, 3, 6}) {
            DiscreteTauModel m;
            for (int k = 0; k < K; ++k) {
                m.tau.push_back((k + 1.0) / (K + 1.0));
                m.mass.push_back((k + 1.0) / (K * (K + 1.0) / 2.0));
                m.cond.emplace_back(1.5 + k, 4.0 - 0.4 * k);
            }
            const auto ops = build_operators(m, grid, 0.4, 3, 5);
            REQUIRE(check_factorization(ops) <= 1e-12);
        }
    }

    SECTION("continuous-tau discretization error decreases in K") {
        const auto dgp = default_dgp();
        const auto ref = quadrature_model(dgp, 256);
        std::vector<double> errs;
        for (int K : {4, 8, 16}) {
            const auto mk = quadrature_model(dgp, K);
            const auto ops_k = build_operators(mk, grid, 0.4, 3, 4);
            const Eigen::MatrixXd J_ref = joint_matrix_low_to_high(ref, grid, 0.4, 3, 4);
            errs.push_back(
                (J_ref - ops_k.L * ops_k.Delta.asDiagonal() * ops_k.H).cwiseAbs().maxCoeff());
        }
        REQUIRE(errs[1] < errs[0]);
        REQUIRE(errs[2] < errs[1]);
    }

    SECTION("perturbing one joint entry moves the error above 1e-4") {
        auto ops = build_operators(demo_model_k4(), grid, 0.4, 3, 4);
        ops.J(5, 7) += 1e-3;
        REQUIRE(check_factorization(ops) >= 1e-4);
    }
}

TEST_CASE("build_operators rejects y outside the middle segment", "[ident]") {
    const auto grid = OperatorGrid::make(Partition(0.35, 0.65), 21, 21, 21);
    REQUIRE_THROWS_AS(build_operators(single_point_model(), grid, 0.2, 3, 4), std::domain_error);
}

TEST_CASE("eig_recover: K=1 ratio and eigenvector direction", "[ident]") {
    const auto model = single_point_model();
    const auto grid = OperatorGrid::make(Partition(0.35, 0.65), 41, 41, 41);
    const double y1 = 0.4, y2 = 0.6;
    const auto J1 = joint_matrix_low_to_high(model, grid, y1, 3, 4);
    const auto J2 = joint_matrix_low_to_high(model, grid, y2, 3, 4);
    const auto dec = eig_recover(J1, J2);
    REQUIRE(dec.rank == 1);
    const double expect = model.cond_pdf(0, y1) / model.cond_pdf(0, y2);
    REQUIRE(dec.eigenvalues(0) == Approx(expect).epsilon(1e-10));

    // Eigenvector proportional to f_{1:1}(. | tau): after unit-integral
    // normalization on [0, c1] it equals f / F(c1).
    Eigen::VectorXd v = dec.vectors.col(0);
    nonnegativize_normalize(v, grid.low.h);
    const double Fc1 = beta_cdf(model.cond[0], grid.partition.c1);
    for (int a = 0; a < grid.low.size(); a += 8)
        REQUIRE(v(a) == Approx(model.cond_pdf(0, grid.low.pts[a]) / Fc1).epsilon(1e-6));
}

TEST_CASE("eig_recover: K=4 eigenvalues equal density ratios to 1e-8", "[ident]") {
    const auto model = demo_model_k4();
    const auto grid = OperatorGrid::make(Partition(0.35, 0.6), 81, 81, 81);
    const double y1 = 0.4, y2 = 0.55;
    REQUIRE(distinct_ratio_gap(model, y1, y2) > 1e-3);
    const auto J1 = joint_matrix_low_to_high(model, grid, y1, 4, 6);
    const auto J2 = joint_matrix_low_to_high(model, grid, y2, 4, 6);
    const auto dec = eig_recover(J1, J2);
    REQUIRE(dec.rank == 4);
    std::vector<double> expect;
    for (int k = 0; k < 4; ++k) expect.push_back(model.cond_pdf(k, y1) / model.cond_pdf(k, y2));
    std::sort(expect.begin(), expect.end(), std::greater<double>());
    for (int i = 0; i < 4; ++i) REQUIRE(dec.eigenvalues(i) == Approx(expect[i]).margin(1e-8));
}

TEST_CASE("eig_recover: swapping y1 and y2 inverts the eigenvalues", "[ident]") {
    const auto model = demo_model_k4();
    const auto grid = OperatorGrid::make(Partition(0.35, 0.6), 61, 61, 61);
    const auto J1 = joint_matrix_low_to_high(model, grid, 0.4, 3, 4);
    const auto J2 = joint_matrix_low_to_high(model, grid, 0.55, 3, 4);
    const auto fwd = eig_recover(J1, J2);
    const auto bwd = eig_recover(J2, J1);
    for (int i = 0; i < fwd.rank; ++i)
        REQUIRE(bwd.eigenvalues(fwd.rank - 1 - i) ==
                Approx(1.0 / fwd.eigenvalues(i)).epsilon(1e-9));
}

TEST_CASE("eig_recover raises on ambiguous eigenvalue gaps", "[ident]") {
    // Distinct symmetric conditionals evaluated at a symmetric y-pair: both
    // density ratios equal one, so the eigenvalues coincide while the
    // operators keep full rank.
    DiscreteTauModel m;
    m.tau = {0.3, 0.7};
    m.mass = {0.5, 0.5};
    m.cond = {BetaParams(2.0, 2.0), BetaParams(3.0, 3.0)};
    const auto grid = OperatorGrid::make(Partition(0.3, 0.7), 41, 41, 41);
    REQUIRE(distinct_ratio_gap(m, 0.4, 0.6) < 1e-12);
    const auto J1 = joint_matrix_low_to_high(m, grid, 0.4, 3, 4);
    const auto J2 = joint_matrix_low_to_high(m, grid, 0.6, 3, 4);
    REQUIRE_THROWS_AS(eig_recover(J1, J2), IdentificationError);
}

TEST_CASE("recover_parent_low: exponent edges and uniform closed form", "[ident]") {
    const auto grid = SegmentGrid::uniform(0.0, 0.4, 81);

    SECTION("r = 3: plain cumulative integral") {
        Eigen::VectorXd v(grid.size());
        for (int i = 0; i < grid.size(); ++i) v(i) = beta_pdf(BetaParams(2.0, 3.0), grid.pts[i]);
        const auto rec = recover_parent_low(v, grid.h, 3);
        const double seg_mass = beta_cdf(BetaParams(2.0, 3.0), 0.4);
        for (int i = 0; i < grid.size(); i += 10)
            REQUIRE(rec.F[i] ==
                    Approx(beta_cdf(BetaParams(2.0, 3.0), grid.pts[i]) / seg_mass).margin(1e-8));
    }

    SECTION("uniform parent, r = 4: scale-free check F/F(c1) = x/c1") {
        Eigen::VectorXd v(grid.size());
        for (int i = 0; i < grid.size(); ++i) v(i) = 2.0 * grid.pts[i];  // f_{2:2} = 2x
        const auto rec = recover_parent_low(v, grid.h, 4);
        for (int i = 1; i < grid.size(); i += 9)
            REQUIRE(rec.F[i] / rec.F.back() == Approx(grid.pts[i] / 0.4).margin(1e-6));
    }

    SECTION("recovered f matches the numerical derivative of recovered F") {
        Eigen::VectorXd v(grid.size());
        for (int i = 0; i < grid.size(); ++i)
            v(i) = 2.0 * beta_cdf(BetaParams(2.0, 4.0), grid.pts[i]) *
                   beta_pdf(BetaParams(2.0, 4.0), grid.pts[i]);
        const auto rec = recover_parent_low(v, grid.h, 4);
        int checked = 0;
        for (int i = 2; i + 2 < grid.size(); i += 7) {
            // The oracle only makes sense where the CDF has left the noise
            // floor; a five-point stencil keeps its truncation error small.
            if (rec.F[i] < 0.02 * rec.F.back()) continue;
            const double dF = (-rec.F[i + 2] + 8.0 * rec.F[i + 1] - 8.0 * rec.F[i - 1] +
                               rec.F[i - 2]) /
                              (12.0 * grid.h);
            REQUIRE(rec.f[i] == Approx(dF).margin(1e-4));
            ++checked;
        }
        REQUIRE(checked >= 8);
    }
}

TEST_CASE("recover_parent_high: survival route", "[ident]") {
    const auto grid = SegmentGrid::uniform(0.65, 1.0, 81);

    SECTION("r = n: exponent one") {
        Eigen::VectorXd v(grid.size());
        for (int i = 0; i < grid.size(); ++i) v(i) = beta_pdf(BetaParams(2.0, 2.0), grid.pts[i]);
        const auto rec = recover_parent_high(v, grid.h, 4, 4);
        const double tail_mass = 1.0 - beta_cdf(BetaParams(2.0, 2.0), 0.65);
        for (int i = 0; i < grid.size(); i += 10)
            REQUIRE(1.0 - rec.F[i] ==
                    Approx((1.0 - beta_cdf(BetaParams(2.0, 2.0), grid.pts[i])) / tail_mass)
                        .margin(1e-8));
    }

    SECTION("uniform parent, n = 4, r = 3: survival proportional to 1 - x") {
        Eigen::VectorXd v(grid.size());
        for (int i = 0; i < grid.size(); ++i) v(i) = 2.0 * (1.0 - grid.pts[i]);  // f_{1:2}
        const auto rec = recover_parent_high(v, grid.h, 4, 3);
        for (int i = 0; i + 1 < grid.size(); i += 9)
            REQUIRE((1.0 - rec.F[i]) / (1.0 - rec.F[0]) ==
                    Approx((1.0 - grid.pts[i]) / (1.0 - 0.65)).margin(1e-6));
        REQUIRE(rec.F.back() == Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("recover_middle: K=1 exact and K=4 proportional to truth", "[ident]") {
    const auto model = demo_model_k4();
    const auto grid = OperatorGrid::make(Partition(0.35, 0.6), 81, 81, 81);
    const int r = 4, n = 6;
    const auto low_dec = eig_recover(joint_matrix_low_to_high(model, grid, 0.4, r, n),
                                     joint_matrix_low_to_high(model, grid, 0.55, r, n));
    const auto high_dec = eig_recover(joint_matrix_high_to_low(model, grid, 0.4, r, n),
                                      joint_matrix_high_to_low(model, grid, 0.55, r, n));

    Eigen::MatrixXd L_rec = low_dec.vectors;
    Eigen::MatrixXd H_rec(high_dec.rank, grid.high.size());
    const auto wz = grid.high.trapezoid_weights();
    for (int k = 0; k < high_dec.rank; ++k) {
        Eigen::VectorXd vl = L_rec.col(k);
        nonnegativize_normalize(vl, grid.low.h);
        L_rec.col(k) = vl;
        Eigen::VectorXd vh = high_dec.vectors.col(k);
        nonnegativize_normalize(vh, grid.high.h);
        for (int c = 0; c < grid.high.size(); ++c) H_rec(k, c) = vh(c) * wz[c];
    }
    const auto mid = recover_middle(model, grid, L_rec, H_rec, r, n);
    REQUIRE(mid.max_offdiag_ratio <= 1e-8);

    // Identify each sorted eigenvalue with its model latent point, then
    // check the recovered-to-truth ratio is constant across the segment.
    for (int k = 0; k < 4; ++k) {
        int model_k = -1;
        for (int km = 0; km < 4; ++km)
            if (std::abs(model.cond_pdf(km, 0.4) / model.cond_pdf(km, 0.55) -
                         low_dec.eigenvalues(k)) < 1e-6)
                model_k = km;
        REQUIRE(model_k >= 0);
        double ratio_min = 1e300, ratio_max = -1e300;
        for (int j = 0; j < grid.mid.size(); j += 5) {
            const double truth = model.cond_pdf(model_k, grid.mid.pts[j]) * model.mass[model_k];
            const double ratio = mid.density(j, k) / truth;
            ratio_min = std::min(ratio_min, ratio);
            ratio_max = std::max(ratio_max, ratio);
        }
        REQUIRE(std::abs(ratio_max / ratio_min - 1.0) <= 1e-6);
    }

    // Single-point model: extraction is a scalar division, exact.
    const auto m1 = single_point_model();
    const auto g1 = OperatorGrid::make(Partition(0.35, 0.65), 41, 41, 41);
    const auto d1 = eig_recover(joint_matrix_low_to_high(m1, g1, 0.4, 3, 4),
                                joint_matrix_low_to_high(m1, g1, 0.6, 3, 4));
    Eigen::MatrixXd L1 = d1.vectors;
    Eigen::VectorXd v1 = L1.col(0);
    nonnegativize_normalize(v1, g1.low.h);
    L1.col(0) = v1;
    const auto d1h = eig_recover(joint_matrix_high_to_low(m1, g1, 0.4, 3, 4),
                                 joint_matrix_high_to_low(m1, g1, 0.6, 3, 4));
    Eigen::MatrixXd H1(1, g1.high.size());
    Eigen::VectorXd vh1 = d1h.vectors.col(0);
    nonnegativize_normalize(vh1, g1.high.h);
    const auto wz1 = g1.high.trapezoid_weights();
    for (int c = 0; c < g1.high.size(); ++c) H1(0, c) = vh1(c) * wz1[c];
    const auto mid1 = recover_middle(m1, g1, L1, H1, 3, 4);
    double r_min = 1e300, r_max = -1e300;
    for (int j = 0; j < g1.mid.size(); ++j) {
        const double ratio = mid1.density(j, 0) / m1.cond_pdf(0, g1.mid.pts[j]);
        r_min = std::min(r_min, ratio);
        r_max = std::max(r_max, ratio);
    }
    REQUIRE(std::abs(r_max / r_min - 1.0) <= 1e-10);
}

TEST_CASE("pin_scales: fixed point and inverse scaling", "[ident]") {
    const auto grid = OperatorGrid::make(Partition(0.3, 0.6), 61, 61, 61);
    const BetaParams p(2.0, 3.0);
    std::vector<double> fl(grid.low.size()), fm(grid.mid.size()), fh(grid.high.size());
    for (int i = 0; i < grid.low.size(); ++i) fl[i] = beta_pdf(p, grid.low.pts[i]);
    for (int i = 0; i < grid.mid.size(); ++i) fm[i] = beta_pdf(p, grid.mid.pts[i]);
    for (int i = 0; i < grid.high.size(); ++i) fh[i] = beta_pdf(p, grid.high.pts[i]);

    const auto s0 = pin_scales(fl, fm, fh, grid);
    REQUIRE(s0.s_low == Approx(1.0).margin(1e-9));
    REQUIRE(s0.s_mid == Approx(1.0).margin(1e-9));
    REQUIRE(s0.s_high == Approx(1.0).margin(1e-9));

    auto fl2 = fl, fm2 = fm, fh2 = fh;
    for (auto& v : fl2) v *= 2.0;
    for (auto& v : fm2) v *= 5.0;
    for (auto& v : fh2) v *= 0.1;
    const auto s = pin_scales(fl2, fm2, fh2, grid);
    REQUIRE(s.s_low == Approx(0.5).margin(1e-9));
    REQUIRE(s.s_mid == Approx(0.2).margin(1e-9));
    REQUIRE(s.s_high == Approx(10.0).margin(1e-9));
}

TEST_CASE("pin_scales raises when a cutoff density vanishes", "[ident]") {
    const auto grid = OperatorGrid::make(Partition(0.3, 0.6), 21, 21, 21);
    std::vector<double> fl(grid.low.size(), 1.0), fm(grid.mid.size(), 1.0),
        fh(grid.high.size(), 1.0);
    fl.back() = 0.0;
    fm.front() = 0.0;
    fm.back() = 0.0;
    fh.front() = 0.0;
    REQUIRE_THROWS_AS(pin_scales(fl, fm, fh, grid), IdentificationError);
}

TEST_CASE("order_and_locate: identity, reversal, shuffle, ties", "[ident]") {
    const auto grid = OperatorGrid::make(Partition(0.3, 0.6), 41, 41, 41);
    auto make_cond = [&](const BetaParams& p) {
        std::vector<double> fl(grid.low.size()), fm(grid.mid.size()), fh(grid.high.size());
        for (int i = 0; i < grid.low.size(); ++i) fl[i] = beta_pdf(p, grid.low.pts[i]);
        for (int i = 0; i < grid.mid.size(); ++i) fm[i] = beta_pdf(p, grid.mid.pts[i]);
        for (int i = 0; i < grid.high.size(); ++i) fh[i] = beta_pdf(p, grid.high.pts[i]);
        return stitch_segments(grid, fl, fm, fh, PinnedScales{});
    };
    const auto lo = make_cond(BetaParams(2.0, 5.0));
    const auto mi = make_cond(BetaParams(3.0, 3.0));
    const auto hi = make_cond(BetaParams(5.0, 2.0));

    REQUIRE(order_and_locate({lo, mi, hi}) == std::vector<int>{0, 1, 2});
    REQUIRE(order_and_locate({hi, mi, lo}) == std::vector<int>{2, 1, 0});
    REQUIRE(order_and_locate({mi, hi, lo}) == std::vector<int>{2, 0, 1});
    REQUIRE_THROWS_AS(order_and_locate({mi, mi}), IdentificationError);
}

TEST_CASE("recover_truncation_moments: point mass, N=1, Beta(2,2), two-point mixture",
          "[ident]") {
    SECTION("N = 2 point mass at 0.5") {
        const auto m = recover_truncation_moments({0.5, 0.25}, 2);
        REQUIRE(m[0] == Approx(0.5).margin(1e-12));
        REQUIRE(m[1] == Approx(0.25).margin(1e-12));
    }

    SECTION("N = 1") {
        const auto m = recover_truncation_moments({0.37}, 1);
        REQUIRE(m[0] == Approx(0.37).margin(1e-14));
    }

    SECTION("Beta(2,2) mixing, N = 5 and N = 10") {
        for (int N : {5, 10}) {
            std::vector<double> P(N);
            for (int n = 1; n <= N; ++n)
                P[n - 1] = std::exp(std::lgamma(N + 1.0) - std::lgamma(n + 1.0) -
                                    std::lgamma(N - n + 1.0) + lbeta(n + 2.0, N - n + 2.0) -
                                    lbeta(2.0, 2.0));
            const auto m = recover_truncation_moments(P, N);
            for (int i = 1; i <= N; ++i)
                REQUIRE(m[i - 1] == Approx(6.0 / double((i + 2) * (i + 3))).margin(1e-10));
        }
    }

    SECTION("brute-force binomial mixture oracle at N = 4") {
        const int N = 4;
        std::vector<double> P(N, 0.0);
        for (int n = 1; n <= N; ++n) {
            auto pmf = [&](double p) {
                return std::exp(std::lgamma(N + 1.0) - std::lgamma(n + 1.0) -
                                std::lgamma(N - n + 1.0)) *
                       std::pow(p, n) * std::pow(1.0 - p, N - n);
            };
            P[n - 1] = 0.6 * pmf(0.3) + 0.4 * pmf(0.8);
        }
        const auto m = recover_truncation_moments(P, N);
        for (int i = 1; i <= N; ++i)
            REQUIRE(m[i - 1] ==
                    Approx(0.6 * std::pow(0.3, i) + 0.4 * std::pow(0.8, i)).margin(1e-12));
    }
}

TEST_CASE("injectivity_diagnostics: completeness failure and full rank", "[ident]") {
    const auto grid = OperatorGrid::make(Partition(0.3, 0.7), 41, 41, 41);

    const auto bad = build_operators(independent_model(3), grid, 0.5, 3, 4);
    const auto dbad = injectivity_diagnostics(bad);
    REQUIRE(dbad[0].name == "L");
    REQUIRE(dbad[0].flagged);
    REQUIRE(dbad[0].sigma_min / dbad[0].sigma_max <= 1e-12);

    const auto good = build_operators(demo_model_k4(), grid, 0.5, 3, 4);
    for (const auto& d : injectivity_diagnostics(good)) REQUIRE_FALSE(d.flagged);
}

TEST_CASE("injectivity_diagnostics: widening the low segment grows sigma_min", "[ident]") {
    const auto model = demo_model_k4();
    std::vector<double> smins;
    for (double c1 : {0.2, 0.3, 0.4}) {
        const auto grid = OperatorGrid::make(Partition(c1, 0.6), 41, 41, 41);
        const auto ops = build_operators(model, grid, 0.5, 3, 4);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(ops.L);
        smins.push_back(svd.singularValues().tail(1)(0));
    }
    REQUIRE(smins[1] > smins[0]);
    REQUIRE(smins[2] > smins[1]);
}

TEST_CASE("full pipeline recovers the K=4 model", "[ident][pipeline]") {
    const auto model = demo_model_k4();
    const auto grid = OperatorGrid::make(Partition(0.35, 0.6));
    PipelineOptions opt{0.4, 0.55, 4, 6};
    const auto res = run_identification(model, grid, opt);

    REQUIRE(res.factorization_error <= 1e-12);
    REQUIRE(res.max_offdiag_ratio <= 1e-8);
    REQUIRE(int(res.conditionals.size()) == 4);

    // Model latent points are already ordered by conditional mean.
    for (int k = 0; k < 4; ++k) {
        const auto& rec = res.conditionals[k];
        double worst = 0.0;
        for (std::size_t i = 0; i < rec.x.size(); ++i)
            worst = std::max(worst, std::abs(rec.F[i] - beta_cdf(model.cond[k], rec.x[i])));
        REQUIRE(worst <= 1e-5);
        REQUIRE(res.masses[k] == Approx(model.mass[k]).margin(1e-8));
    }
}

TEST_CASE("pipeline recovers shuffled latent labels in mean order", "[ident][pipeline]") {
    DiscreteTauModel shuffled;
    shuffled.tau = {0.6, 0.2, 0.8, 0.4};
    shuffled.mass = {0.3, 0.1, 0.4, 0.2};
    shuffled.cond = {BetaParams(4.0, 3.0), BetaParams(2.0, 5.0), BetaParams(5.0, 2.0),
                     BetaParams(3.0, 4.0)};
    const auto grid = OperatorGrid::make(Partition(0.35, 0.6));
    PipelineOptions opt{0.4, 0.55, 4, 6};
    const auto res = run_identification(shuffled, grid, opt);
    const std::vector<double> want_mass = {0.1, 0.2, 0.3, 0.4};
    const std::vector<BetaParams> want_cond = {BetaParams(2.0, 5.0), BetaParams(3.0, 4.0),
                                               BetaParams(4.0, 3.0), BetaParams(5.0, 2.0)};
    for (int k = 0; k < 4; ++k) {
        REQUIRE(res.masses[k] == Approx(want_mass[k]).margin(1e-8));
        double worst = 0.0;
        for (std::size_t i = 0; i < res.conditionals[k].x.size(); i += 13)
            worst = std::max(worst, std::abs(res.conditionals[k].F[i] -
                                             beta_cdf(want_cond[k], res.conditionals[k].x[i])));
        REQUIRE(worst <= 1e-5);
    }
}

TEST_CASE("default_partition lands at the marginal terciles", "[ident]") {
    const auto model = demo_model_k4();
    const auto part = default_partition(model);
    REQUIRE(model.marg_x_cdf(part.c1) == Approx(1.0 / 3.0).margin(1e-10));
    REQUIRE(model.marg_x_cdf(part.c2) == Approx(2.0 / 3.0).margin(1e-10));
    REQUIRE(part.c1 < part.c2);
}
