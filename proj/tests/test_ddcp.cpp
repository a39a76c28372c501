#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "contact/ddcp.hpp"

using namespace contact;

namespace {

RateSet fixed_a() {
    RateSet r;
    r.model = Model::A;
    r.kappa = 1.0;
    r.kappa_tilde_or_star = 0.5;
    r.lambda = 0;
    r.lambda_tilde = 0.2;
    r.h = 0;
    r.h_tilde = 0.6;
    return r;
}

}  // namespace

TEST_CASE("law evaluation: closed forms") {
    const DensityLaw k = DensityLaw::kefi(2.0, 0.3, 0.9, 0.5);
    LawValue v = eval_law(k, 0.0);
    CHECK(v.lambda == doctest::Approx(0.315).epsilon(1e-14));  // 2*0.7/4*0.9
    CHECK(v.h == 0.0);
    CHECK(!v.clamped);

    v = eval_law(DensityLaw::kefi(1.0, 0.5, 1.0, 0.0), 0.5);
    CHECK(v.lambda == doctest::Approx(0.125).epsilon(1e-14));
    CHECK(v.h == doctest::Approx(0.25).epsilon(1e-14));

    // epsilon == g: both rates hit exactly 0 at rho = 1, nothing to clamp.
    v = eval_law(DensityLaw::kefi(2.0, 0.3, 0.9, 0.9), 1.0);
    CHECK(v.lambda == 0.0);
    CHECK(v.h == 0.0);
    CHECK(!v.clamped);

    // g > epsilon: negative evaluations clamp with the flag raised.
    v = eval_law(DensityLaw::kefi(2.0, 0.3, 0.5, 1.0), 1.0);
    CHECK(v.lambda == 0.0);
    CHECK(v.h == 0.0);
    CHECK(v.clamped);

    CHECK_THROWS_AS(eval_law(k, 1.3), std::invalid_argument);
    CHECK_THROWS_AS(eval_law(k, -1e-3), std::invalid_argument);
    CHECK_NOTHROW(eval_law(k, -1e-10));     // round-off slop is absorbed
    CHECK_NOTHROW(eval_law(k, 1 + 1e-10));
    CHECK(eval_law(k, -1e-10).h == 0.0);    // clamped into [0,1] first
}

TEST_CASE("law parameter validation") {
    CHECK_THROWS_AS(DensityLaw::kefi(0.0, 0.3, 0.9, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(DensityLaw::kefi(2.0, 0.0, 0.9, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(DensityLaw::kefi(2.0, 1.0, 0.9, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(DensityLaw::kefi(2.0, 0.3, 0.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(DensityLaw::kefi(2.0, 0.3, 0.9, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(DensityLaw::constant(-0.1, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(DensityLaw::constant(0.1, -0.2), std::invalid_argument);
    CHECK_NOTHROW(DensityLaw::constant(0.0, 0.0));

    // Tables: >= 2 knots, [0,1] span, strict increase, nonnegative values.
    CHECK_THROWS_AS(DensityLaw::tabulated({0.0}, {1.0}, {0, 1}, {1, 1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(DensityLaw::tabulated({0.1, 1}, {1, 1}, {0, 1}, {1, 1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(DensityLaw::tabulated({0, 0.9}, {1, 1}, {0, 1}, {1, 1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(DensityLaw::tabulated({0, 0.5, 0.5, 1}, {1, 1, 1, 1}, {0, 1}, {1, 1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(DensityLaw::tabulated({0, 1}, {1, -0.5}, {0, 1}, {1, 1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(DensityLaw::tabulated({0, 1}, {1, 1, 1}, {0, 1}, {1, 1}),
                    std::invalid_argument);
    CHECK_NOTHROW(DensityLaw::tabulated({0, 0.4, 1}, {0.2, 0.5, 0.1}, {0, 1}, {1, 2}));
}

TEST_CASE("lipschitz bounds and zero-touch detection") {
    CHECK(DensityLaw::kefi(2.0, 0.3, 0.9, 0.5).lipschitz() ==
          doctest::Approx(0.54).epsilon(1e-14));  // beta*delta*max(eps,|eps-2g|)
    CHECK(DensityLaw::constant(3.0, 4.0).lipschitz() == 0.0);
    const DensityLaw tab =
        DensityLaw::tabulated({0, 0.5, 1}, {0, 1, 1}, {0, 1}, {0.3, 0.3});
    CHECK(tab.lipschitz() == doctest::Approx(2.0).epsilon(1e-14));

    CHECK(DensityLaw::kefi(2.0, 0.3, 0.9, 0.0).touches_zero());  // H(0) = 0 always
    CHECK(!DensityLaw::constant(0.5, 0.2).touches_zero());
    CHECK(DensityLaw::constant(0.5, 0.0).touches_zero());
    CHECK(DensityLaw::constant(0.0, 0.2).touches_zero());
    CHECK(tab.touches_zero());  // lambda knot at 0
    CHECK(!DensityLaw::tabulated({0, 1}, {0.1, 0.2}, {0, 1}, {0.3, 0.4}).touches_zero());
}

TEST_CASE("flat tables evaluate identically to the constant law") {
    const DensityLaw tab =
        DensityLaw::tabulated({0, 0.25, 1}, {0.3, 0.3, 0.3}, {0, 1}, {0.15, 0.15});
    const DensityLaw cst = DensityLaw::constant(0.3, 0.15);
    for (double rho : {0.0, 0.1, 0.25, 0.333333333, 0.5, 0.99, 1.0}) {
        const LawValue a = eval_law(tab, rho);
        const LawValue b = eval_law(cst, rho);
        CHECK(a.lambda == b.lambda);  // bit-for-bit on flat segments
        CHECK(a.h == b.h);
    }
}

TEST_CASE("kefi structure at evaluation level") {
    // g = 0 makes H linear in rho and Lambda constant.
    const double beta = 1.7, delta = 0.4, eps = 0.8;
    const DensityLaw k1 = DensityLaw::kefi(beta, delta, eps, 0.0);
    for (double rho : {0.0, 0.2, 0.5, 0.9, 1.0}) {
        const LawValue v = eval_law(k1, rho);
        CHECK(v.h == doctest::Approx(beta * delta * eps * rho).epsilon(1e-14));
        CHECK(v.lambda == doctest::Approx(beta * (1 - delta) / 4 * eps).epsilon(1e-14));
    }
    // Doubling beta doubles both rates pointwise.
    const DensityLaw k2 = DensityLaw::kefi(2 * beta, delta, eps, 0.0);
    for (double rho : {0.1, 0.6, 1.0}) {
        CHECK(eval_law(k2, rho).h == doctest::Approx(2 * eval_law(k1, rho).h).epsilon(1e-14));
        CHECK(eval_law(k2, rho).lambda ==
              doctest::Approx(2 * eval_law(k1, rho).lambda).epsilon(1e-14));
    }
}

TEST_CASE("trajectory under a constant law converges in one sweep per window") {
    TrajectoryConfig cfg;
    cfg.law = DensityLaw::constant(0.4, 0.3);
    cfg.fixed = fixed_a();
    cfg.initial_density = 1.0;
    cfg.geom = {GeomKind::Torus, 8, 8, kPlus};
    cfg.T = 1.0;
    cfg.dt_grid = 0.25;
    cfg.replicas = 4;
    cfg.tol = 0.01;
    cfg.max_sweeps = 50;
    RngStream rng(601);
    const TrajectorySolution sol = solve_trajectory(cfg, rng);
    CHECK(sol.converged);
    CHECK(sol.residual == 0.0);  // the schedule is the fixed point already
    CHECK(!sol.clamped);
    CHECK(sol.dt_grid == 0.25);
    REQUIRE(sol.rho.size() == 4);
    REQUIRE(sol.lambda.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(sol.lambda[i] == 0.4);
        CHECK(sol.h[i] == 0.3);
        CHECK(sol.rho[i] >= 0.0);
        CHECK(sol.rho[i] <= 1.0);
        CHECK(sol.rho_ci[i] >= 0.0);
    }
    REQUIRE(!sol.window_sweeps.empty());
    for (int s : sol.window_sweeps) CHECK(s == 1);
    CHECK(sol.sweeps == static_cast<int>(sol.window_sweeps.size()));
    CHECK(sol.window_ends.back() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("trajectory replays bit-identically under the same seed") {
    TrajectoryConfig cfg;
    cfg.law = DensityLaw::kefi(2.0, 0.3, 0.9, 0.5);
    cfg.fixed = fixed_a();
    cfg.initial_density = 0.6;
    cfg.geom = {GeomKind::Torus, 8, 8, kPlus};
    cfg.T = 0.75;
    cfg.dt_grid = 0.25;
    cfg.replicas = 4;
    cfg.tol = 0.05;
    cfg.max_sweeps = 60;
    RngStream r1(7001), r2(7001);
    const TrajectorySolution a = solve_trajectory(cfg, r1);
    const TrajectorySolution b = solve_trajectory(cfg, r2);
    REQUIRE(a.rho.size() == b.rho.size());
    for (std::size_t i = 0; i < a.rho.size(); ++i) {
        CHECK(a.rho[i] == b.rho[i]);
        CHECK(a.lambda[i] == b.lambda[i]);
        CHECK(a.h[i] == b.h[i]);
    }
    CHECK(a.sweeps == b.sweeps);
    CHECK(a.residual == b.residual);
}

TEST_CASE("trajectory configuration validation") {
    TrajectoryConfig cfg;
    cfg.law = DensityLaw::constant(0.4, 0.3);
    cfg.fixed = fixed_a();
    cfg.geom = {GeomKind::Torus, 4, 4, kPlus};
    RngStream rng(1);
    TrajectoryConfig bad = cfg;
    bad.T = 0;
    CHECK_THROWS_AS(solve_trajectory(bad, rng), std::invalid_argument);
    bad = cfg;
    bad.dt_grid = -0.1;
    CHECK_THROWS_AS(solve_trajectory(bad, rng), std::invalid_argument);
    bad = cfg;
    bad.replicas = 1;
    CHECK_THROWS_AS(solve_trajectory(bad, rng), std::invalid_argument);
    bad = cfg;
    bad.initial_density = 1.2;
    CHECK_THROWS_AS(solve_trajectory(bad, rng), std::invalid_argument);
    bad = cfg;
    bad.tol = 0;
    CHECK_THROWS_AS(solve_trajectory(bad, rng), std::invalid_argument);
    bad = cfg;
    bad.window_sweep_cap = 1;
    CHECK_THROWS_AS(solve_trajectory(bad, rng), std::invalid_argument);
}

TEST_CASE("stationary solver pins the constant-law fixed point") {
    StationaryConfig cfg;
    cfg.law = DensityLaw::constant(0.5, 0.4);
    cfg.fixed = fixed_a();
    cfg.geom = {GeomKind::Torus, 8, 8, kPlus};
    cfg.tol = 0.02;
    cfg.max_iters = 20;
    cfg.burn_in = 10;
    cfg.sample_time = 40;
    cfg.batches = 16;
    RngStream rng(77);
    const StationaryFixedPoint fp = solve_stationary(cfg, rng);
    CHECK(fp.converged);
    // The start is law(0.5) = the constant itself: the rates never move.
    CHECK(fp.lambda_star == 0.5);
    CHECK(fp.h_star == 0.4);
    CHECK(fp.residual == 0.0);
    CHECK(!fp.law_touches_zero);
    CHECK(fp.rho_star > 0.0);
    CHECK(fp.rho_star < 1.0);
    CHECK(fp.rho_ci > 0.0);
    CHECK(fp.iters >= 1);
    CHECK(!fp.trace.empty());
    CHECK(fp.trace.size() == static_cast<std::size_t>(fp.iters));
}

TEST_CASE("stationary solver: h = 0 short-circuits to density zero") {
    StationaryConfig cfg;
    cfg.law = DensityLaw::constant(0.5, 0.0);
    cfg.fixed = fixed_a();
    cfg.geom = {GeomKind::Torus, 8, 8, kPlus};
    cfg.tol = 0.02;
    RngStream rng(78);
    const StationaryFixedPoint fp = solve_stationary(cfg, rng);
    CHECK(fp.rho_star == 0.0);
    CHECK(fp.h_star == 0.0);
    CHECK(fp.law_touches_zero);
    CHECK(fp.converged);
    CHECK(fp.residual == 0.0);
}

TEST_CASE("stationary solver configuration validation") {
    StationaryConfig cfg;
    cfg.law = DensityLaw::constant(0.5, 0.4);
    cfg.fixed = fixed_a();
    cfg.geom = {GeomKind::Torus, 4, 4, kPlus};
    RngStream rng(2);
    StationaryConfig bad = cfg;
    bad.fixed.kappa = 0;
    CHECK_THROWS_AS(solve_stationary(bad, rng), std::invalid_argument);
    bad = cfg;
    bad.fixed.h_tilde = 0;
    CHECK_THROWS_AS(solve_stationary(bad, rng), std::invalid_argument);
    bad = cfg;
    bad.damping = 0;
    CHECK_THROWS_AS(solve_stationary(bad, rng), std::invalid_argument);
    bad = cfg;
    bad.damping = 1.5;
    CHECK_THROWS_AS(solve_stationary(bad, rng), std::invalid_argument);
    bad = cfg;
    bad.max_iters = 0;
    CHECK_THROWS_AS(solve_stationary(bad, rng), std::invalid_argument);
}

TEST_CASE("multi-start enumeration returns one result per start") {
    StationaryConfig cfg;
    cfg.law = DensityLaw::constant(0.4, 0.3);
    cfg.fixed = fixed_a();
    cfg.geom = {GeomKind::Torus, 6, 6, kPlus};
    cfg.tol = 0.05;
    cfg.max_iters = 10;
    cfg.burn_in = 5;
    cfg.sample_time = 20;
    cfg.batches = 8;
    RngStream rng(91);
    const std::vector<std::array<double, 2>> starts = {{0.1, 0.1}, {0.8, 0.8}};
    const auto fps = solve_stationary_multi(cfg, starts, rng);
    REQUIRE(fps.size() == 2);
    // A constant law pulls every start to the same rates.
    for (const StationaryFixedPoint& fp : fps) {
        CHECK(std::abs(fp.lambda_star - 0.4) <= cfg.tol + 1e-12);
        CHECK(std::abs(fp.h_star - 0.3) <= cfg.tol + 1e-12);
    }
}
