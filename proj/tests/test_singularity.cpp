#include <catch2/catch_amalgamated.hpp>

#include "coqe/singularity.hpp"
#include "support/oracles.hpp"

using namespace coqe;
using Catch::Approx;

namespace {

PhaseState state(double t, std::vector<double> y, std::vector<double> L, double xi) {
    PhaseState s;
    s.t = t;
    s.y = std::move(y);
    s.L = std::move(L);
    s.xi = xi;
    return s;
}

IntegratorOptions tight() {
    IntegratorOptions o;
    o.rel_tol = 1e-10;
    o.abs_tol = 1e-12;
    return o;
}

Trajectory true_cone(int d, double to = 0.0, IntegratorOptions o = tight()) {
    const double L0 = oracles::cone_L(d, 1.0);
    return integrate(preset_torus(d), {0.0, 0.0, 1.0}, state(1.0, {0.0}, {L0}, 1.0), to, o);
}

} // namespace

TEST_CASE("blow-up functional at pinned states") {
    // pointwise evaluation on the (1/d)-slope family: M t = sqrt(1 + 1/d)
    for (int d : {2, 3}) {
        for (double t : {0.05, 0.3, 0.8}) {
            const auto v = blowup_functional(
                preset_torus(d), state(t, {std::log(t) / d}, {1.0 / (d * t)}, 1.0 / t));
            CHECK(v.Mt == Approx(std::sqrt(1.0 + 1.0 / d)).epsilon(1e-14));
        }
    }
    CHECK(blowup_functional(preset_torus(2), state(0.3, {1.7}, {0.0}, 0.0)).M == 0.0);
    CHECK(blowup_functional(preset_sphere2(), state(0.0, {0.0}, {0.0}, 0.0)).M == Approx(1.0));
    // signed Mt with a caller-supplied origin
    const auto v = blowup_functional(preset_sphere2(), state(0.25, {0.0}, {0.0}, 0.0), 0.75);
    CHECK(v.Mt == Approx(-0.5));
}

TEST_CASE("analyze_blowup on the closed-form Riccati pole") {
    // lambda = -1, unstable branch: L = coth-type pole at t = 0.5 ln 5
    const auto an = analyze_blowup(preset_circle(), {0.0, -1.0, 1.0},
                                   state(0.0, {0.0}, {-1.5}, -1.5), Direction::forward, tight());
    CHECK(an.report.t_sing == Approx(0.5 * std::log(5.0)).margin(1e-6));
    CHECK(an.report.exponent > 0.95);
    CHECK(an.report.exponent < 1.05);
    CHECK(an.report.fit_residual <= 0.05);
    CHECK(an.report.fit_samples >= 10);
    CHECK(std::isfinite(an.report.sup_Mt));
    // the circle violates the dimension hypothesis and is flagged, not rejected
    REQUIRE_FALSE(an.report.diagnostics.empty());
    CHECK(an.report.diagnostics.front().find("dimension hypothesis") != std::string::npos);
    CHECK(an.trajectory.termination == Termination::blow_up_detected);
}

TEST_CASE("analyze_blowup on the exact torus cone") {
    const double L0 = oracles::cone_L(2, 1.0);
    const auto an = analyze_blowup(preset_torus(2), {0.0, 0.0, 1.0},
                                   state(1.0, {0.0}, {L0}, 1.0), Direction::backward, tight());
    // M t = sqrt(2) along the exact solution, so sup over samples matches it
    CHECK(an.report.sup_Mt == Approx(std::sqrt(2.0)).margin(1e-6));
    CHECK(std::abs(an.report.t_sing) < 1e-6);
    CHECK(an.report.exponent > 0.95);
    CHECK(an.report.exponent < 1.05);
    CHECK(an.report.diagnostics.empty()); // d = 2 satisfies the hypothesis; rate within bound
}

TEST_CASE("sphere singular runs respect the rate bound") {
    for (double L0 : {-5.0, -2.0}) {
        const auto an = analyze_blowup(preset_sphere2(), {1.0, 0.0, 1.0},
                                       state(1.0, {0.0}, {L0}, 0.0), Direction::backward, tight());
        CHECK(std::isfinite(an.report.sup_Mt));
        CHECK(an.report.exponent <= 1.05);
        CHECK(an.report.diagnostics.empty());
    }
}

TEST_CASE("analyze_blowup reports a missing singularity") {
    CHECK_THROWS_AS(analyze_blowup(preset_torus(2), {1.0, 0.0, 1.0},
                                   state(1.0, {0.0}, {0.0}, 0.0), Direction::backward, tight()),
                    no_singularity_error);
    CHECK_THROWS_AS(analyze_blowup(preset_circle(), {0.0, 0.0, 1.0},
                                   state(0.0, {0.0}, {0.0}, 0.0), Direction::backward, tight(),
                                   0.5),
                    parameter_error); // t_stop on the wrong side
}

TEST_CASE("rescaling the cone") {
    Trajectory traj = true_cone(2, 0.05);
    REQUIRE(traj.termination == Termination::reached_end);

    SECTION("window 0 gives the normalized anchor sample") {
        const RescaledTrajectory rt = rescale(preset_torus(2), traj, 0.4, 0.0);
        REQUIRE(rt.samples.size() == 1);
        const auto& s = rt.samples.front();
        const double M =
            std::sqrt(s.xi * s.xi + 2.0 * s.L[0] * s.L[0] + ricci_majorant(preset_torus(2), s.y));
        CHECK(M == Approx(1.0).margin(1e-10));
    }
    SECTION("anchor values match the closed form") {
        const RescaledTrajectory rt = rescale(preset_torus(2), traj, 0.1, 2.0);
        CHECK(rt.M_anchor == Approx(std::sqrt(2.0) / 0.1).epsilon(1e-9));
        for (const auto& s : rt.samples)
            if (s.s == 0.0) CHECK(s.xi == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
    }
    SECTION("rescaled system residual is at interpolation accuracy") {
        const RescaledTrajectory rt = rescale(preset_torus(2), traj, 0.1, 2.0);
        CHECK(rescaled_residual(preset_torus(2), {0.0, 0.0, 1.0}, rt) <= 1e-6);
    }
    SECTION("anchor outside the range is rejected") {
        CHECK_THROWS_AS(rescale(preset_torus(2), traj, 2.0, 1.0), parameter_error);
    }
}

TEST_CASE("rescaled residual on a curved trajectory with lambda") {
    Trajectory traj = integrate(preset_sphere2(), {1.0, 1.0, 1.0},
                                state(0.0, {0.0}, {0.3}, 0.5), 1.0, tight());
    const RescaledTrajectory rt = rescale(preset_sphere2(), traj, 0.5, 1.0);
    CHECK(rescaled_residual(preset_sphere2(), {1.0, 1.0, 1.0}, rt) <= 1e-6);
    // normalization at s = 0
    for (const auto& s : rt.samples)
        if (s.s == 0.0) {
            const double M = std::sqrt(s.xi * s.xi + 2.0 * s.L[0] * s.L[0] +
                                       ricci_majorant(preset_sphere2(), s.y) /
                                           (rt.M_anchor * rt.M_anchor));
            CHECK(M == Approx(1.0).margin(1e-10));
        }
}

TEST_CASE("growth-bound constant is stable under tolerance refinement") {
    IntegratorOptions loose = tight();
    loose.rel_tol = 1e-8;
    loose.abs_tol = 1e-10;
    Trajectory a = true_cone(2, 0.02, loose);
    Trajectory b = true_cone(2, 0.02, tight());
    const double sa = growth_bound_constant(preset_torus(2), {0.0, 0.0, 1.0}, a);
    const double sb = growth_bound_constant(preset_torus(2), {0.0, 0.0, 1.0}, b);
    CHECK(std::isfinite(sa));
    CHECK(sa == Approx(sb).epsilon(0.10));
    // the monitored inequality |M'| <= (s + 10%) M^2 holds by construction
    CHECK(sb > 0.0);
}

TEST_CASE("anchor scan finds the sup-attaining sample") {
    Trajectory traj = true_cone(2, 0.05);
    const auto [t_star, value] = anchor_scan(preset_torus(2), traj, 0.05);
    // on the cone M(t)(t - T) = sqrt(2)(t - T)/t increases in t
    CHECK(t_star == Approx(1.0));
    CHECK(value == Approx(std::sqrt(2.0) * (1.0 - 0.05) / 1.0).epsilon(1e-9));
    CHECK_THROWS_AS(anchor_scan(preset_torus(2), traj, 5.0), parameter_error);
}

TEST_CASE("power-law fit recovers a synthetic exponent") {
    std::vector<double> d, M;
    for (int k = 0; k < 40; ++k) {
        const double x = 1e-6 * std::pow(10.0, k / 39.0);
        d.push_back(x);
        M.push_back(2.5 * std::pow(x, -1.3));
    }
    const PowerLawFit fit = fit_power_law(d, M);
    CHECK(fit.exponent == Approx(1.3).epsilon(1e-10));
    CHECK(fit.log_coeff == Approx(std::log(2.5)).margin(1e-9));
    CHECK(fit.rms_residual < 1e-12);
    CHECK_THROWS_AS(fit_power_law({1.0}, {1.0}), parameter_error);
}
