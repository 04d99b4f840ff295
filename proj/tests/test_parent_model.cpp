#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "osuh/numerics.hpp"
#include "osuh/parent_model.hpp"
#include "osuh/rng.hpp"

using Catch::Approx;
using namespace osuh;

TEST_CASE("os_pdf: uniform-parent anchors", "[parent]") {
    const auto u = uniform_parent();
    REQUIRE(os_pdf(u, 0.3, 1, 2, 0.25) == Approx(1.5).margin(1e-14));  // 2(1-x)
    REQUIRE(os_pdf(u, 0.3, 2, 2, 0.5) == Approx(1.0).margin(1e-14));   // 2x
    REQUIRE_THROWS_AS(os_pdf(u, 0.3, 3, 2, 0.5), std::out_of_range);
}

TEST_CASE("os_pdf: DGP minimum matches closed form and simulation", "[parent]") {
    const auto dgp = default_dgp();
    const auto parent = dgp.as_parent();
    const double tau = 0.5;
    // X | tau=0.5 ~ Beta(1.5, 2.25); minimum of two draws.
    const BetaParams cond(1.5, 2.25);
    const double x = 0.3;
    const double closed = 2.0 * (1.0 - beta_cdf(cond, x)) * beta_pdf(cond, x);
    REQUIRE(os_pdf(parent, tau, 1, 2, x) == Approx(closed).epsilon(1e-12));

    // Histogram cross-check: P(min in [0.28, 0.32]) over 1e6 simulated minima.
    const std::size_t m = 1'000'000;
    auto eng = make_engine(20240801u);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double a = draw_beta(eng, cond);
        const double b = draw_beta(eng, cond);
        const double mn = std::min(a, b);
        if (mn >= 0.28 && mn < 0.32) ++hits;
    }
    const double p_bin = adaptive_simpson(
        [&](double t) { return os_pdf(parent, tau, 1, 2, t); }, 0.28, 0.32, 1e-12);
    const double se = std::sqrt(p_bin * (1.0 - p_bin) / double(m));
    REQUIRE(std::abs(double(hits) / double(m) - p_bin) < 3.0 * se);
}

TEST_CASE("os_pdf integrates to one and r=s=1 reduces to the parent", "[parent]") {
    const auto parent = default_dgp().as_parent();
    for (auto [r, s] : std::vector<std::pair<int, int>>{{1, 1}, {1, 3}, {2, 4}, {4, 4}}) {
        const double mass = adaptive_simpson(
            [&](double x) { return os_pdf(parent, 0.4, r, s, x); }, 0.0, 1.0, 1e-11);
        REQUIRE(mass == Approx(1.0).margin(1e-8));
    }
    for (double x : {0.1, 0.5, 0.9})
        REQUIRE(os_pdf(parent, 0.7, 1, 1, x) == parent.cond_pdf(x, 0.7));
}

TEST_CASE("trunc_pdf: anchors, identity at R=0, quadrature oracle", "[parent]") {
    const auto u = uniform_parent();
    REQUIRE(trunc_pdf(u, 0.2, 0.5, 0.75) == Approx(2.0).margin(1e-14));

    const auto parent = default_dgp().as_parent();
    for (double x : {0.05, 0.4, 0.95})
        REQUIRE(trunc_pdf(parent, 0.3, 0.0, x) == Approx(parent.cond_pdf(x, 0.3)).epsilon(1e-14));

    const double tau = 0.25, R = 0.7, x = 0.8;
    const double surv_quad = adaptive_simpson(
        [&](double t) { return parent.cond_pdf(t, tau); }, R, 1.0, 1e-12);
    REQUIRE(trunc_pdf(parent, tau, R, x) ==
            Approx(parent.cond_pdf(x, tau) / surv_quad).margin(1e-10));

    REQUIRE_THROWS_AS(trunc_pdf(parent, 0.3, 0.7, 0.6), std::domain_error);
}

TEST_CASE("trunc_pdf integrates to one on [R,1]", "[parent]") {
    const auto parent = default_dgp().as_parent();
    for (double R : {0.3, 0.7}) {
        const double mass = adaptive_simpson(
            [&](double x) { return trunc_pdf(parent, 0.6, R, x); }, R, 1.0, 1e-11);
        REQUIRE(mass == Approx(1.0).margin(1e-8));
    }
}

TEST_CASE("trunc_pdf: total truncation raises", "[parent]") {
    // Conditional supported on [0, 0.5]: F(0.7) = 1.
    ParentModel clipped{[](double x, double) { return x <= 0.5 ? 2.0 : 0.0; },
                        [](double x, double) { return std::min(2.0 * x, 1.0); },
                        [](double) { return 1.0; }};
    REQUIRE_THROWS_AS(trunc_pdf(clipped, 0.1, 0.7, 0.8), NumericError);
}

TEST_CASE("ParentModel contract holds for the default DGP", "[parent]") {
    const auto parent = default_dgp().as_parent();
    const double tmass = adaptive_simpson(parent.marg_t_pdf, 0.0, 1.0, 1e-11);
    REQUIRE(tmass == Approx(1.0).margin(1e-8));
    for (double tau : {0.25, 0.5, 0.75}) {
        REQUIRE(parent.cond_cdf(0.0, tau) == 0.0);
        REQUIRE(parent.cond_cdf(1.0, tau) == 1.0);
        double prev = 0.0;
        for (int i = 1; i <= 50; ++i) {
            const double cur = parent.cond_cdf(i / 50.0, tau);
            REQUIRE(cur >= prev);
            prev = cur;
        }
    }
}
