// Acceptance battery: one pass/fail line per criterion, exit 3 on any
// failure.  Each check pins its tolerances inline; the heavy criteria (5, 8)
// drive the full coupled scan machinery end to end.
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <queue>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "contact/ddcp.hpp"
#include "contact/engine.hpp"
#include "contact/harness.hpp"
#include "contact/oracle.hpp"
#include "contact/percolation.hpp"
#include "contact/timeline.hpp"

using namespace contact;

namespace {

bool g_all_ok = true;

void report(int k, bool ok, const char* what, const std::string& measured) {
    std::printf("[%s] criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", k, what,
                measured.c_str());
    std::fflush(stdout);
    g_all_ok = g_all_ok && ok;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

RateSet model_b_ref() {  // the exact-bound reference point
    RateSet r;
    r.model = Model::B;
    r.kappa = 1.0;
    r.kappa_tilde_or_star = 0.5;
    r.lambda = 0.3;
    r.h = 0.2;
    r.h_tilde = 0.4;
    return r;
}

RateSet ddcp_fixed_a() {
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

double exact_mean_density(const GeneratorMatrix& gen, const Eigen::VectorXd& pi) {
    double rho = 0;
    for (std::int64_t i = 0; i < gen.dim; ++i)
        rho += pi[i] * gen.decode(i).density_of_ones();
    return rho;
}

// --- criterion 1: exact marginal-decay bound ------------------------------

bool criterion_1() {
    const Geometry g{GeomKind::Torus, 2, 2, kPlus};
    const GeneratorMatrix gen = build_generator(model_b_ref(), g);
    const Eigen::VectorXd pi = stationary(gen);
    const Eigen::VectorXd xi = point_mass(gen, Configuration::filled(g, kMinus));
    double worst_slack = 1e300;
    bool ok = true;
    for (double t : {0.5, 1.0, 2.0, 4.0, 8.0}) {
        const Eigen::VectorXd mu = transient(gen, xi, t);
        const double tv = tv_restricted(mu, pi, 4, {0});
        const double bound = std::exp(-0.2 * t);  // |Lambda| e^{-h t}, h = 0.2
        ok = ok && tv <= bound + 1e-10;
        worst_slack = std::min(worst_slack, bound - tv);
    }
    report(1, ok, "one-site transient distance below e^{-ht}",
           fmt("min slack %.3e over t in {0.5..8}", worst_slack));
    return ok;
}

// --- criterion 2: Monte Carlo vs exact stationary law ---------------------

bool criterion_2() {
    const Geometry g{GeomKind::Torus, 2, 2, kPlus};
    RngStream rng(220214);
    bool ok = true;
    double worst_pull = 0, worst_tv = 0;
    for (int variant = 0; variant < 10; ++variant) {
        RateSet r;
        r.model = variant < 5 ? Model::A : Model::B;
        auto draw = [&] { return 0.1 + 0.9 * rng.uniform(); };
        r.kappa = draw();
        r.kappa_tilde_or_star = draw();
        r.lambda = draw();
        r.lambda_tilde = r.model == Model::A ? draw() : 0.0;
        r.h = draw();
        r.h_tilde = draw();

        const GeneratorMatrix gen = build_generator(r, g);
        const Eigen::VectorXd pi = stationary(gen);
        const double exact = exact_mean_density(gen, pi);

        RngStream mc(derive_seed(99001, variant));
        const DensityEstimate est = stationary_density(r, g, 200, 1e5, mc, 32, 0.99);
        const double pull = std::abs(est.mean - exact) / est.ci_halfwidth;
        worst_pull = std::max(worst_pull, pull);
        ok = ok && pull <= 1.0;

        // Time-weighted occupation of all 81 states along one long chain.
        RngStream occ_rng(derive_seed(99002, variant));
        Engine eng(Configuration::filled(g, kPlus), r);
        double t = 0;
        while (t < 200) t += eng.step(occ_rng).dt;
        std::vector<double> occ(static_cast<std::size_t>(gen.dim), 0.0);
        const double horizon = 1e5;
        const double t_end = t + horizon;
        while (t < t_end) {
            const std::int64_t idx = gen.encode(eng.config());
            const EventDescriptor ev = eng.step(occ_rng);
            occ[static_cast<std::size_t>(idx)] += std::min(ev.dt, t_end - t);
            t += ev.dt;
        }
        double tv = 0;
        for (std::int64_t i = 0; i < gen.dim; ++i)
            tv += std::abs(occ[static_cast<std::size_t>(i)] / horizon - pi[i]);
        tv *= 0.5;
        worst_tv = std::max(worst_tv, tv);
        ok = ok && tv <= 0.02;
    }
    report(2, ok, "stationary density in 99% CI and occupation TV <= 0.02",
           fmt("worst pull %.2f sigma-units, worst TV %.4f over 10 rate sets",
               worst_pull, worst_tv));
    return ok;
}

// --- criterion 3: analytic per-site cases ---------------------------------

bool criterion_3() {
    bool ok = true;
    // Model A, lambda = lambda_tilde = 0, everything else 1: per-site uniform.
    RateSet a;
    a.model = Model::A;
    a.kappa = a.kappa_tilde_or_star = a.h = a.h_tilde = 1.0;
    a.lambda = a.lambda_tilde = 0.0;
    RngStream r1(330001);
    const DensityEstimate ea = stationary_density(a, {GeomKind::Torus, 4, 4, kPlus},
                                                  200, 3e4, r1, 32, 0.9973);
    const double pull_a = std::abs(ea.mean - 1.0 / 3.0) / ea.ci_halfwidth;
    ok = ok && pull_a <= 1.0;

    // Model B, lambdaless: per-site 3-state chain, solved directly.
    RateSet b;
    b.model = Model::B;
    b.kappa = 0.8;
    b.kappa_tilde_or_star = 0.3;
    b.lambda = 0.0;
    b.h = 0.5;
    b.h_tilde = 0.7;
    Eigen::Matrix3d Q = Eigen::Matrix3d::Zero();  // states (-1, 0, 1)
    Q(0, 1) = b.h_tilde;
    Q(1, 2) = b.h;
    Q(1, 0) = b.kappa_tilde_or_star;
    Q(2, 1) = b.kappa;
    Q(2, 0) = b.kappa_tilde_or_star;
    for (int i = 0; i < 3; ++i) Q(i, i) = -Q.row(i).sum();
    Eigen::Matrix3d A = Q.transpose();
    A.row(2) = Eigen::RowVector3d::Ones();  // replace one equation by sum = 1
    const Eigen::Vector3d pi3 = A.fullPivLu().solve(Eigen::Vector3d(0, 0, 1));
    RngStream r2(330002);
    const DensityEstimate eb = stationary_density(b, {GeomKind::Torus, 3, 3, kPlus},
                                                  200, 3e4, r2, 32, 0.9973);
    const double pull_b = std::abs(eb.mean - pi3[2]) / eb.ci_halfwidth;
    ok = ok && pull_b <= 1.0;

    report(3, ok, "analytic per-site stationary densities within 3 sigma",
           fmt("uniform case %.3f +- %.3f (pull %.2f), 3-state case %.3f vs %.3f "
               "(pull %.2f)",
               ea.mean, ea.ci_halfwidth, pull_a, eb.mean, pi3[2], pull_b));
    return ok;
}

// --- criterion 4: monotone coupling ---------------------------------------

bool criterion_4() {
    const Geometry g{GeomKind::Torus, 16, 16, kPlus};
    RngStream rng(440001);
    int violations = 0;
    for (int run = 0; run < 200; ++run) {
        RateSet base;
        if (run % 2 == 0) {
            base.model = Model::A;
            base.kappa = 2.0;
            base.kappa_tilde_or_star = 1.0;
            base.lambda = 0.5;
            base.lambda_tilde = 0.25;
            base.h = 0.6;
            base.h_tilde = 0.4;
        } else {
            base.model = Model::B;
            base.kappa = 1.5;
            base.kappa_tilde_or_star = 0.5;
            base.lambda = 0.8;
            base.h = 0.3;
            base.h_tilde = 0.2;
        }
        const QParameterization qp = QParameterization::from_base(base.rescaled());
        const double u1 = rng.uniform(), u2 = rng.uniform();
        const double ql = std::min(u1, u2), qh = std::max(u1, u2);
        Configuration hi = Configuration::filled(g, kZero);
        for (SiteState& s : hi.states)
            s = static_cast<SiteState>(static_cast<int>(rng.below(3)) - 1);
        Configuration lo = hi;
        for (SiteState& s : lo.states)
            s = static_cast<SiteState>(
                static_cast<int>(rng.below(static_cast<std::uint64_t>(s + 2))) - 1);
        const GraphicalTimeline tl = build_coupled(g, 0.0, 20.0, qp, rng);
        const CoupleResult res =
            couple_monotone(tl, ql, qh, base.model, lo, hi, 20.0);
        if (!res.ordered) ++violations;
    }
    report(4, violations == 0, "200 coupled runs stay pathwise ordered",
           fmt("%d violations", violations));
    return violations == 0;
}

// --- criterion 5: sharpness profile ---------------------------------------

bool criterion_5() {
    RateSet b;
    b.model = Model::B;
    b.kappa = 3;                  // kappa : kappa_star = 3 : 1
    b.kappa_tilde_or_star = 1;
    b.lambda = 4;                 // lambda : h : h_tilde = 4 : 1 : 1
    b.h = 1;
    b.h_tilde = 1;
    const QParameterization base = QParameterization::from_base(b.rescaled());
    const Geometry geom{GeomKind::Torus, 128, 128, kPlus};
    const std::vector<double> q_grid = {0.05, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95};
    SharpnessOptions opts;  // burn 30, gap 2, all-origins, eps 0.05
    RngStream rng(550001);
    const SharpnessReport rep =
        sharpness_scan(base, q_grid, geom, {16}, 500, opts, rng);

    std::string profile;
    for (const SharpnessEntry& e : rep.entries) {
        const char* d = e.decisions[0].decision == PhaseDecision::Subcritical ? "-"
                        : e.decisions[0].decision == PhaseDecision::Supercritical
                            ? "+"
                            : "0";
        profile += fmt("q=%.2f rho=%.4f %s%s ", e.q, e.rho, d,
                       e.tail.degenerate ? " (deg)" : "");
    }

    // (a) smallest q with a resolvable tail: exponential with r^2 >= 0.98.
    int first = -1;
    for (std::size_t i = 0; i < rep.entries.size(); ++i)
        if (!rep.entries[i].tail.degenerate && rep.entries[i].tail.fit_points >= 3) {
            first = static_cast<int>(i);
            break;
        }
    bool ok_a = first >= 0;
    double r2 = 0, rate = 0;
    if (ok_a) {
        const TailEstimate& t = rep.entries[static_cast<std::size_t>(first)].tail;
        r2 = t.r_squared;
        rate = t.rate;
        ok_a = t.classification == TailClass::Exponential && t.r_squared >= 0.98;
    }
    // (b) decision profile ordered across q.
    const bool ok_b = rep.ordered;
    // (c) top of the grid supercritical at n = 16.
    const bool ok_c =
        rep.entries.back().decisions[0].decision == PhaseDecision::Supercritical;

    const bool ok = ok_a && ok_b && ok_c;
    report(5, ok, "sharpness profile over the q-grid",
           fmt("%s| first resolvable q=%s rate=%.3f r2=%.4f | ordered=%d super@0.95=%d",
               profile.c_str(),
               first >= 0 ? fmt("%.2f", rep.entries[static_cast<std::size_t>(first)].q).c_str()
                          : "none",
               rate, r2, ok_b ? 1 : 0, ok_c ? 1 : 0));
    return ok;
}

// --- criterion 6: discretized lower bound ---------------------------------

bool criterion_6() {
    const Geometry g{GeomKind::Torus, 12, 12, kPlus};
    RngStream rng(660001);
    int le_holds = 0, eq_tight = 0;
    const int trials = 500;
    for (int trial = 0; trial < trials; ++trial) {
        RateSet base;
        if (trial % 2 == 0) {
            base.model = Model::A;
            base.kappa = 2.0;
            base.kappa_tilde_or_star = 1.0;
            base.lambda = 0.5;
            base.lambda_tilde = 0.25;
            base.h = 0.6;
            base.h_tilde = 0.4;
        } else {
            base.model = Model::B;
            base.kappa = 1.5;
            base.kappa_tilde_or_star = 0.5;
            base.lambda = 0.8;
            base.h = 0.3;
            base.h_tilde = 0.2;
        }
        const QParameterization qp = QParameterization::from_base(base.rescaled());
        const GraphicalTimeline tl = build_coupled(g, -3.5, 0.5, qp, rng);
        const int n = 1 + static_cast<int>(rng.below(9));
        const int x = g.index(static_cast<int>(rng.below(12)),
                              static_cast<int>(rng.below(12)));
        const double q = 0.1 + 0.8 * rng.uniform();
        const SiteState eta = boundary_pinned_state(tl, x, q, n);
        const SiteState lb = implied_lower_bound(tl, q, 0.05, x, n);
        if (static_cast<int>(lb) <= static_cast<int>(eta)) ++le_holds;
        // A vanishing window discards nothing: the bound must be achieved.
        if (implied_lower_bound(tl, q, 1e-9, x, n) == eta) ++eq_tight;
    }
    const bool ok = le_holds == trials && eq_tight == trials;
    report(6, ok, "implied lower bound below the pinned-boundary state",
           fmt("%d/%d ordered at delta=0.05, %d/%d tight at delta=1e-9", le_holds,
               trials, eq_tight, trials));
    return ok;
}

// --- criterion 7: DDCP fixed points ---------------------------------------

bool criterion_7() {
    // (a) constant law: one sweep per window, and the schedule run matches
    // the fixed-rate law on the oracle lattice.
    TrajectoryConfig tc;
    tc.law = DensityLaw::constant(0.4, 0.3);
    tc.fixed = ddcp_fixed_a();
    tc.initial_density = 1.0;
    tc.geom = {GeomKind::Torus, 2, 2, kPlus};
    tc.T = 2.0;
    tc.dt_grid = 0.25;
    tc.replicas = 24;
    tc.tol = 0.01;
    RngStream r7a(770001);
    const TrajectorySolution sol = solve_trajectory(tc, r7a);
    bool one_sweep = sol.converged;
    for (int s : sol.window_sweeps) one_sweep = one_sweep && s == 1;

    RateSet full = ddcp_fixed_a();
    full.lambda = 0.4;
    full.h = 0.3;
    const GeneratorMatrix gen = build_generator(full, tc.geom);
    const Eigen::VectorXd exact = transient(
        gen, point_mass(gen, Configuration::filled(tc.geom, kPlus)), tc.T);
    const RateSchedule sched = RateSchedule::constant(full);
    std::vector<double> emp(static_cast<std::size_t>(gen.dim), 0.0);
    const int M = 100000;
    RngStream r7tv(770002);
    const Configuration init = Configuration::filled(tc.geom, kPlus);
    for (int i = 0; i < M; ++i) {
        const SimResult res = run(init, sched, tc.T, r7tv, -1.0);
        emp[static_cast<std::size_t>(gen.encode(res.final))] += 1.0;
    }
    double tv = 0;
    for (std::int64_t i = 0; i < gen.dim; ++i)
        tv += std::abs(emp[static_cast<std::size_t>(i)] / M - exact[i]);
    tv *= 0.5;
    const bool ok_a = one_sweep && tv <= 0.02;

    // (b) Kefi fixed point: residual below twice the fresh CI.
    StationaryConfig sc;
    sc.law = DensityLaw::kefi(2.0, 0.3, 0.9, 0.5);
    sc.fixed = ddcp_fixed_a();
    sc.geom = {GeomKind::Torus, 16, 16, kPlus};
    sc.damping = 0.5;
    sc.tol = 0.005;
    sc.max_iters = 60;
    sc.burn_in = 20;
    sc.sample_time = 80;
    sc.batches = 16;
    RngStream r7b(770003);
    const StationaryFixedPoint fp = solve_stationary(sc, r7b);
    const bool ok_b = fp.converged && fp.residual < 2 * fp.rho_ci;

    // (c) seed independence of the converged schedule.
    TrajectoryConfig uc;
    uc.law = sc.law;
    uc.fixed = ddcp_fixed_a();
    uc.initial_density = 0.6;
    uc.geom = {GeomKind::Torus, 16, 16, kPlus};
    uc.T = 2.0;
    uc.dt_grid = 0.25;
    uc.replicas = 16;
    uc.tol = 0.01;
    uc.max_sweeps = 400;
    RngStream s1(770004), s2(881005);
    const TrajectorySolution t1 = solve_trajectory(uc, s1);
    const TrajectorySolution t2 = solve_trajectory(uc, s2);
    bool ok_c = t1.converged && t2.converged && t1.rho.size() == t2.rho.size();
    const double L = uc.law.lipschitz();
    double rho_slack = 1e300, rate_slack = 1e300;
    if (ok_c)
        for (std::size_t i = 0; i < t1.rho.size(); ++i) {
            const double allow = 2 * (t1.rho_ci[i] + t2.rho_ci[i]);
            rho_slack = std::min(rho_slack, allow - std::abs(t1.rho[i] - t2.rho[i]));
            const double rate_allow = 2 * L * (t1.rho_ci[i] + t2.rho_ci[i]);
            rate_slack = std::min(
                {rate_slack, rate_allow - std::abs(t1.lambda[i] - t2.lambda[i]),
                 rate_allow - std::abs(t1.h[i] - t2.h[i])});
            ok_c = ok_c && std::abs(t1.rho[i] - t2.rho[i]) <= allow &&
                   std::abs(t1.lambda[i] - t2.lambda[i]) <= rate_allow &&
                   std::abs(t1.h[i] - t2.h[i]) <= rate_allow;
        }

    const bool ok = ok_a && ok_b && ok_c;
    report(7, ok, "density-driven fixed points",
           fmt("(a) one-sweep=%d TV=%.4f (b) residual=%.4g vs 2ci=%.4g (c) "
               "min rho-gap slack %.3g, min rate-gap slack %.3g",
               one_sweep ? 1 : 0, tv, fp.residual, 2 * fp.rho_ci,
               std::min(rho_slack, 9.9), std::min(rate_slack, 9.9)));
    return ok;
}

// --- criterion 8: threshold Lipschitz envelope ----------------------------

bool criterion_8() {
    ScanConfig cfg;
    // h_tilde well above kappa_star keeps the -1 pool small (kstar/(kstar+ht)
    // ~ 2.4%), so h can actually push the 1-density through the crossing
    // regime; a starved -1 recovery would cap the density below it for every
    // h.  eps_hat sits at 0.15 rather than 0.05 because the long-crossing
    // probability flattens near 1: certifying at 0.85 lands on the steep part
    // of the curve, which shrinks the h-band where probe decisions are noisy
    // from ~0.2 down to ~0.03 and makes the bracket ladder reproducible
    // across seeds.  The threshold slope |dh/dlambda| here is about 3,
    // so the alpha = 0.25 grid keeps each per-step drop (~0.75) comfortably
    // inside the 4*alpha = 1.0 envelope allowance.
    cfg.rates.model = Model::B;
    cfg.rates.kappa = 0.7;
    cfg.rates.kappa_tilde_or_star = 0.05;
    cfg.rates.h_tilde = 2.0;
    cfg.rates.lambda = 0;
    cfg.rates.h = 0;
    cfg.lambda_grid = {0.20, 0.45, 0.70, 0.95, 1.20};  // step alpha = 0.25
    cfg.geom = {GeomKind::Torus, 24, 24, kPlus};
    cfg.n = 3;
    cfg.eps_hat = 0.15;
    cfg.bisection_tol = 0.05;
    cfg.h_max = 7.0;
    cfg.samples_per_probe = 3000;
    cfg.burn_in = 40;
    cfg.sample_gap = 2.0;
    RngStream rng(880001);
    const ScanResult res = h_perc_scan(cfg, rng);

    bool all_bracketed = true;
    std::string brackets;
    for (const ScanEntry& e : res.entries) {
        all_bracketed = all_bracketed && e.bracketed;
        brackets += fmt("l=%.2f [%.3f, %.3f]%s ", e.lambda, e.h_lo, e.h_hi,
                        e.super_at_zero ? "*" : "");
    }
    // Dual route: recompute both envelope inequalities from the raw brackets
    // rather than trusting the scan's own flags.
    const double alpha = 0.25;
    bool mono = true, env = true;
    for (std::size_t i = 0; i + 1 < res.entries.size(); ++i) {
        const ScanEntry& a = res.entries[i];
        const ScanEntry& b = res.entries[i + 1];
        if (!a.bracketed || !b.bracketed) continue;
        mono = mono && b.h_lo <= a.h_hi + 1e-12;
        env = env && b.h_hi >= a.h_lo - 4 * alpha - 1e-12;
    }
    const bool ok = all_bracketed && res.monotone_ok && res.envelope_ok && mono && env;
    report(8, ok, "h-threshold brackets: nonincreasing and 4-alpha Lipschitz",
           fmt("%s| flags mono=%d env=%d, recomputed mono=%d env=%d",
               brackets.c_str(), res.monotone_ok ? 1 : 0, res.envelope_ok ? 1 : 0,
               mono ? 1 : 0, env ? 1 : 0));
    return ok;
}

// --- criterion 9: cluster and crossing oracles ----------------------------

struct BfsRef {
    std::vector<std::int32_t> label;
    std::vector<std::int64_t> sizes;
    std::vector<std::uint8_t> wx, wy;
};

BfsRef bfs_reference(const Configuration& c) {
    const Geometry& g = c.geom;
    const int n = g.sites();
    BfsRef out;
    out.label.assign(static_cast<std::size_t>(n), -1);
    std::vector<long long> px(static_cast<std::size_t>(n)), py(static_cast<std::size_t>(n));
    const int sx[4] = {-1, 1, 0, 0};
    const int sy[4] = {0, 0, -1, 1};
    for (int start = 0; start < n; ++start) {
        if (c.at(start) != kPlus || out.label[static_cast<std::size_t>(start)] != -1)
            continue;
        const std::int32_t id = static_cast<std::int32_t>(out.sizes.size());
        out.sizes.push_back(0);
        out.wx.push_back(0);
        out.wy.push_back(0);
        std::queue<int> q;
        q.push(start);
        out.label[static_cast<std::size_t>(start)] = id;
        px[static_cast<std::size_t>(start)] = py[static_cast<std::size_t>(start)] = 0;
        while (!q.empty()) {
            const int v = q.front();
            q.pop();
            ++out.sizes[static_cast<std::size_t>(id)];
            const auto nbs = neighbors(g, v);
            for (int d = 0; d < 4; ++d) {
                const Neighbor& nb = nbs[static_cast<std::size_t>(d)];
                if (nb.exterior || c.at(nb.site) != kPlus) continue;
                const long long ex = px[static_cast<std::size_t>(v)] + sx[d];
                const long long ey = py[static_cast<std::size_t>(v)] + sy[d];
                std::int32_t& lab = out.label[static_cast<std::size_t>(nb.site)];
                if (lab == -1) {
                    lab = id;
                    px[static_cast<std::size_t>(nb.site)] = ex;
                    py[static_cast<std::size_t>(nb.site)] = ey;
                    q.push(nb.site);
                } else {
                    if (px[static_cast<std::size_t>(nb.site)] != ex)
                        out.wx[static_cast<std::size_t>(id)] = 1;
                    if (py[static_cast<std::size_t>(nb.site)] != ey)
                        out.wy[static_cast<std::size_t>(id)] = 1;
                }
            }
        }
    }
    return out;
}

bool bfs_window_crossing(const Configuration& c, const CrossWindow& w, CrossDir dir) {
    const Geometry& g = c.geom;
    const int cols = w.m + 1, rows = w.n + 1;
    auto site_at = [&](int i, int j) {
        int x = w.x0 + i, y = w.y0 + j;
        if (g.kind == GeomKind::Torus) {
            x = ((x % g.width) + g.width) % g.width;
            y = ((y % g.height) + g.height) % g.height;
        }
        return g.index(x, y);
    };
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(cols * rows), 0);
    std::queue<std::pair<int, int>> q;
    auto push = [&](int i, int j) {
        const std::size_t flat = static_cast<std::size_t>(j * cols + i);
        if (seen[flat] || c.at(site_at(i, j)) != kPlus) return;
        seen[flat] = 1;
        q.emplace(i, j);
    };
    if (dir == CrossDir::Horizontal)
        for (int j = 0; j < rows; ++j) push(0, j);
    else
        for (int i = 0; i < cols; ++i) push(i, 0);
    while (!q.empty()) {
        const auto [i, j] = q.front();
        q.pop();
        if (dir == CrossDir::Horizontal && i == w.m) return true;
        if (dir == CrossDir::Vertical && j == w.n) return true;
        if (i > 0) push(i - 1, j);
        if (i + 1 < cols) push(i + 1, j);
        if (j > 0) push(i, j - 1);
        if (j + 1 < rows) push(i, j + 1);
    }
    return false;
}

bool criterion_9() {
    RngStream rng(990001);
    int partition_miss = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        const Geometry g{rep % 3 == 2 ? GeomKind::Rectangle : GeomKind::Torus, 8, 8,
                         kPlus};
        Configuration c = Configuration::filled(g, kMinus);
        const double density = 0.25 + 0.5 * rng.uniform();
        for (SiteState& s : c.states)
            if (rng.uniform() < density) s = kPlus;
            else if (rng.uniform() < 0.5) s = kZero;
        const ClusterReport got = label_clusters(c);
        const BfsRef want = bfs_reference(c);
        bool same = got.labels == want.label && got.sizes == want.sizes;
        if (same)
            for (std::size_t k = 0; k < want.sizes.size(); ++k)
                same = same && got.wraps_x[k] == want.wx[k] &&
                       got.wraps_y[k] == want.wy[k];
        if (!same) ++partition_miss;
    }

    int crossing_miss = 0;
    const Geometry g{GeomKind::Torus, 16, 16, kPlus};
    for (int rep = 0; rep < 500; ++rep) {
        Configuration c = Configuration::filled(g, kZero);
        const double density = 0.3 + 0.4 * rng.uniform();
        for (SiteState& s : c.states)
            if (rng.uniform() < density) s = kPlus;
        CrossWindow w;
        const int nn = 1 + static_cast<int>(rng.below(5));
        w.m = 3 * nn;
        w.n = nn;
        w.x0 = static_cast<int>(rng.below(16));
        w.y0 = static_cast<int>(rng.below(16));
        for (CrossDir dir : {CrossDir::Horizontal, CrossDir::Vertical})
            if (crossing(c, w, dir) != bfs_window_crossing(c, w, dir)) ++crossing_miss;
    }
    const bool ok = partition_miss == 0 && crossing_miss == 0;
    report(9, ok, "cluster partitions and crossings match flood fill",
           fmt("%d/1000 partition mismatches, %d/1000 crossing mismatches",
               partition_miss, crossing_miss));
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    int which = 0;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc)
            which = std::atoi(argv[++i]);
    bool (*checks[])() = {criterion_1, criterion_2, criterion_3,
                          criterion_4, criterion_5, criterion_6,
                          criterion_7, criterion_8, criterion_9};
    if (which < 0 || which > 9) {
        std::fprintf(stderr, "usage: acceptance [--criterion 0..9]\n");
        return 2;
    }
    try {
        if (which == 0)
            for (auto* c : checks) c();
        else
            checks[which - 1]();
    } catch (const std::exception& e) {
        std::printf("[FAIL] criterion %d: exception: %s\n", which, e.what());
        return 3;
    }
    return g_all_ok ? 0 : 3;
}
