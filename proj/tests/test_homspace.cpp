#include <catch2/catch_amalgamated.hpp>

#include "coqe/homspace.hpp"
#include "support/oracles.hpp"

using namespace coqe;
using Catch::Approx;

TEST_CASE("ricci map on the presets") {
    const auto s2 = preset_sphere2();
    CHECK(ricci_map(s2, {0.0})[0] == Approx(0.5).margin(0.0));
    CHECK(ricci_map(s2, {std::log(2.0)})[0] == Approx(1.0 / 8.0).epsilon(1e-15));

    const auto circle = preset_circle();
    CHECK(ricci_map(circle, {0.0})[0] == 0.0);
    CHECK(ricci_map(circle, {-2.7})[0] == 0.0);
}

TEST_CASE("majorant on the presets") {
    const auto s2 = preset_sphere2();
    CHECK(ricci_majorant(s2, {0.0}) == Approx(1.0));
    CHECK(ricci_majorant(s2, {std::log(2.0)}) == Approx(0.25));
    CHECK(ricci_majorant(preset_torus(3), {1.7}) == 0.0);
}

TEST_CASE("analytic Jacobian matches the hand values and finite differences") {
    const auto s2 = preset_sphere2();
    CHECK(ricci_jacobian(s2, {0.0})[0] == Approx(-1.0));
    CHECK(ricci_jacobian(preset_torus(2), {0.3})[0] == 0.0);

    const double at_ln2 = ricci_jacobian(s2, {std::log(2.0)})[0];
    CHECK(at_ln2 == Approx(-0.25).epsilon(1e-14));
    const double fd = oracles::ricci_jacobian_fd(s2, {std::log(2.0)}, 1e-6)[0];
    CHECK(std::abs(at_ln2 - fd) < 1e-8);
}

TEST_CASE("jacobian agrees with central differences on random spaces") {
    oracles::Rng rng(20240901);
    for (int trial = 0; trial < 100; ++trial) {
        const HomSpaceSpec s = oracles::random_space(rng, true);
        std::vector<double> y(static_cast<std::size_t>(s.n));
        for (auto& v : y) v = rng.uniform(-3.0, 3.0);
        const auto J = ricci_jacobian(s, y);
        const auto F = oracles::ricci_jacobian_fd(s, y, 1e-6);
        double scale = 1.0;
        for (double v : J) scale = std::max(scale, std::abs(v));
        for (std::size_t k = 0; k < J.size(); ++k)
            CHECK(std::abs(J[k] - F[k]) <= 1e-6 * scale);
    }
}

TEST_CASE("scale covariance and majorant bound") {
    oracles::Rng rng(77001);
    for (int trial = 0; trial < 100; ++trial) {
        const HomSpaceSpec s = oracles::random_space(rng, true);
        std::vector<double> y(static_cast<std::size_t>(s.n)), ys(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = rng.uniform(-2.0, 2.0);
        const double shift = rng.uniform(-1.5, 1.5);
        for (std::size_t i = 0; i < y.size(); ++i) ys[i] = y[i] + shift;
        const auto r = ricci_map(s, y);
        const auto rs = ricci_map(s, ys);
        const double factor = std::exp(-2.0 * shift);
        for (std::size_t i = 0; i < r.size(); ++i)
            CHECK(rs[i] == Approx(factor * r[i]).margin(1e-12 * (1.0 + std::abs(r[i]))));
        CHECK(ricci_majorant(s, ys) ==
              Approx(factor * ricci_majorant(s, y)).epsilon(1e-12));

        // every term of r appears among the terms of R (gamma symmetric here)
        const double R = ricci_majorant(s, y);
        for (double ri : r) CHECK(std::abs(ri) <= R * (1.0 + 1e-12));
    }
}

TEST_CASE("majorant gradient matches finite differences") {
    oracles::Rng rng(5150);
    for (int trial = 0; trial < 25; ++trial) {
        const HomSpaceSpec s = oracles::random_space(rng, true);
        std::vector<double> y(static_cast<std::size_t>(s.n));
        for (auto& v : y) v = rng.uniform(-2.0, 2.0);
        const auto g = ricci_majorant_gradient(s, y);
        for (int j = 0; j < s.n; ++j) {
            auto yp = y, ym = y;
            yp[static_cast<std::size_t>(j)] += 1e-6;
            ym[static_cast<std::size_t>(j)] -= 1e-6;
            const double fd = (ricci_majorant(s, yp) - ricci_majorant(s, ym)) / 2e-6;
            CHECK(g[static_cast<std::size_t>(j)] ==
                  Approx(fd).margin(1e-6 * (1.0 + std::abs(fd))));
        }
    }
}

TEST_CASE("overflow guard names the offending summand") {
    const auto s2 = preset_sphere2();
    CHECK_THROWS_AS(ricci_map(s2, {301.0}), domain_overflow_error);
    CHECK_THROWS_AS(ricci_majorant(s2, {-301.0}), domain_overflow_error);
    try {
        ricci_map(s2, {350.0});
        FAIL("expected overflow");
    } catch (const domain_overflow_error& e) {
        CHECK(e.index == 0);
    }
    // combined exponent overflow within the per-component limit
    const HomSpaceSpec two = oracles::two_summand_space();
    CHECK_THROWS_AS(ricci_majorant(two, {299.0, -299.0}), domain_overflow_error);
}

TEST_CASE("validation rejects malformed spaces") {
    CHECK_THROWS_AS(make_space(1, {0}, {1.0}, {}, "bad-dim"), parameter_error);
    CHECK_THROWS_AS(make_space(1, {2}, {-1.0}, {}, "bad-beta"), parameter_error);
    CHECK_THROWS_AS(make_space(1, {2}, {1.0}, {-0.5}, "bad-gamma"), parameter_error);
    CHECK_THROWS_AS(make_space(2, {2}, {1.0, 1.0}, {}, "short-d"), parameter_error);
}

TEST_CASE("gamma symmetry defect is reported, not rejected") {
    HomSpaceSpec s = oracles::two_summand_space();
    CHECK(gamma_symmetry_defect(s) == 0.0);
    s.gamma_at(0, 1, 0) = 0.9; // no matching (1,0,0) entry
    CHECK(gamma_symmetry_defect(s) == Approx(0.9));
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("preset registry") {
    CHECK(make_preset("circle").has_value());
    CHECK(make_preset("sphere2")->beta[0] == 1.0);
    CHECK(make_preset("torus(5)")->d[0] == 5);
    CHECK_FALSE(make_preset("torus(0)").has_value());
    CHECK_FALSE(make_preset("klein").has_value());

    CHECK_FALSE(preset_circle().dimension_hypothesis());
    CHECK(preset_sphere2().dimension_hypothesis());
    CHECK(preset_torus(3).degenerate());
    CHECK_FALSE(preset_sphere2().degenerate());
    CHECK(preset_torus(4).total_dim() == 4);
}

TEST_CASE("bound estimates: exact ratios on the sphere") {
    const auto est = estimate_ricci_bounds(preset_sphere2(), 2000, 3.0, 42);
    CHECK(est.c1 == Approx(0.5).epsilon(1e-15));
    CHECK(est.c3 == Approx(0.5).epsilon(1e-15));
    CHECK(est.c2 == Approx(1.0).epsilon(1e-15));
    CHECK(est.c3 <= est.c1);
    CHECK(est.samples == 2000);
}

TEST_CASE("bound estimates: deterministic and degenerate-space guarded") {
    const auto a = estimate_ricci_bounds(preset_sphere2(), 500, 2.0, 7);
    const auto b = estimate_ricci_bounds(preset_sphere2(), 500, 2.0, 7);
    CHECK(a.c1 == b.c1);
    CHECK(a.c2 == b.c2);
    CHECK(a.c3 == b.c3);
    CHECK_THROWS_AS(estimate_ricci_bounds(preset_torus(2), 100, 1.0, 1), degenerate_space_error);
    CHECK_THROWS_AS(estimate_ricci_bounds(preset_sphere2(), 0, 1.0, 1), parameter_error);
    CHECK_THROWS_AS(estimate_ricci_bounds(preset_sphere2(), 10, -1.0, 1), parameter_error);
}

TEST_CASE("bound estimates agree with a dense grid scan on a two-summand space") {
    const HomSpaceSpec s = oracles::two_summand_space();
    const double box = 2.0;
    const auto mc = estimate_ricci_bounds(s, 1000000, box, 2024);

    // brute-force oracle: 1000 x 1000 grid over the same box
    double c1_grid = 0.0, c3_grid = std::numeric_limits<double>::infinity();
    const int G = 1000;
    for (int i = 0; i < G; ++i)
        for (int j = 0; j < G; ++j) {
            const std::vector<double> y = {-box + 2.0 * box * i / (G - 1),
                                           -box + 2.0 * box * j / (G - 1)};
            const auto r = ricci_map(s, y);
            const double R = ricci_majorant(s, y);
            const double rn = std::sqrt(r[0] * r[0] + r[1] * r[1]);
            c1_grid = std::max(c1_grid, rn / R);
            c3_grid = std::min(c3_grid, rn / R);
        }
    CHECK(std::isfinite(mc.c1));
    CHECK(mc.c1 == Approx(c1_grid).epsilon(0.10));
    CHECK(mc.c3 == Approx(c3_grid).margin(0.05));
    CHECK(mc.c3 <= mc.c1);
    CHECK(mc.c2 > 0.0);
}
