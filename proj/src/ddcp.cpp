#include "contact/ddcp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "contact/stats.hpp"

namespace contact {

DensityLaw DensityLaw::kefi(double beta, double delta, double epsilon, double g) {
    DensityLaw law;
    law.kind = LawKind::Kefi;
    law.beta = beta;
    law.delta = delta;
    law.epsilon = epsilon;
    law.g = g;
    law.validate();
    return law;
}

DensityLaw DensityLaw::constant(double lambda0, double h0) {
    DensityLaw law;
    law.kind = LawKind::Constant;
    law.lambda0 = lambda0;
    law.h0 = h0;
    law.validate();
    return law;
}

DensityLaw DensityLaw::tabulated(std::vector<double> lam_rho,
                                 std::vector<double> lam_val,
                                 std::vector<double> h_rho,
                                 std::vector<double> h_val) {
    DensityLaw law;
    law.kind = LawKind::Tabulated;
    law.lam_rho = std::move(lam_rho);
    law.lam_val = std::move(lam_val);
    law.h_rho = std::move(h_rho);
    law.h_val = std::move(h_val);
    law.validate();
    return law;
}

namespace {

void check_table(const std::vector<double>& xs, const std::vector<double>& ys,
                 const char* what) {
    if (xs.size() < 2 || xs.size() != ys.size())
        throw std::invalid_argument(std::string("density law: ") + what +
                                    " table needs >= 2 matched knots");
    if (std::abs(xs.front()) > 1e-12 || std::abs(xs.back() - 1.0) > 1e-12)
        throw std::invalid_argument(std::string("density law: ") + what +
                                    " grid must span [0, 1]");
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!std::isfinite(xs[i]) || !std::isfinite(ys[i]))
            throw std::invalid_argument(std::string("density law: ") + what +
                                        " table has non-finite entries");
        if (i > 0 && xs[i] <= xs[i - 1])
            throw std::invalid_argument(std::string("density law: ") + what +
                                        " grid must strictly increase");
        if (ys[i] < 0)
            throw std::invalid_argument(std::string("density law: ") + what +
                                        " values must be nonnegative");
    }
}

double interp(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    if (it == xs.begin()) return ys.front();
    if (it == xs.end()) return ys.back();
    const std::size_t i = static_cast<std::size_t>(it - xs.begin());
    const double w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    // Written so flat segments return the knot value bit-for-bit.
    return ys[i - 1] + (ys[i] - ys[i - 1]) * w;
}

double max_abs_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    double m = 0;
    for (std::size_t i = 1; i < xs.size(); ++i)
        m = std::max(m, std::abs((ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1])));
    return m;
}

}  // namespace

void DensityLaw::validate() const {
    switch (kind) {
        case LawKind::Kefi:
            if (!std::isfinite(beta) || !std::isfinite(delta) ||
                !std::isfinite(epsilon) || !std::isfinite(g))
                throw std::invalid_argument("density law: non-finite parameter");
            if (!(beta > 0) || !(epsilon > 0) || !(g >= 0) ||
                !(delta > 0 && delta < 1))
                throw std::invalid_argument(
                    "density law: need beta > 0, epsilon > 0, g >= 0, delta in (0,1)");
            break;
        case LawKind::Constant:
            if (!std::isfinite(lambda0) || !std::isfinite(h0) || lambda0 < 0 || h0 < 0)
                throw std::invalid_argument(
                    "density law: constant rates must be finite and >= 0");
            break;
        case LawKind::Tabulated:
            check_table(lam_rho, lam_val, "lambda");
            check_table(h_rho, h_val, "h");
            break;
    }
}

double DensityLaw::lipschitz() const {
    switch (kind) {
        case LawKind::Kefi:
            // |Lambda'| = beta(1-delta)g/4; H'(rho) = beta*delta*(eps - 2g rho).
            return std::max(beta * (1 - delta) * g / 4.0,
                            beta * delta * std::max(epsilon, std::abs(epsilon - 2 * g)));
        case LawKind::Constant:
            return 0.0;
        case LawKind::Tabulated:
            return std::max(max_abs_slope(lam_rho, lam_val),
                            max_abs_slope(h_rho, h_val));
    }
    return 0.0;
}

bool DensityLaw::touches_zero() const {
    switch (kind) {
        case LawKind::Kefi:
            return true;  // H(0) = 0 identically
        case LawKind::Constant:
            return lambda0 <= 0 || h0 <= 0;
        case LawKind::Tabulated: {
            // Piecewise-linear minima sit at knots.
            for (double v : lam_val)
                if (v <= 0) return true;
            for (double v : h_val)
                if (v <= 0) return true;
            return false;
        }
    }
    return false;
}

LawValue eval_law(const DensityLaw& law, double rho) {
    law.validate();
    if (!(rho >= -1e-9 && rho <= 1 + 1e-9))
        throw std::invalid_argument("eval_law: rho outside [0,1]");
    rho = std::clamp(rho, 0.0, 1.0);
    LawValue v;
    switch (law.kind) {
        case LawKind::Kefi: {
            const double s = law.epsilon - law.g * rho;
            v.lambda = law.beta * (1 - law.delta) / 4.0 * s;
            v.h = law.beta * law.delta * rho * s;
            break;
        }
        case LawKind::Constant:
            v.lambda = law.lambda0;
            v.h = law.h0;
            break;
        case LawKind::Tabulated:
            v.lambda = interp(law.lam_rho, law.lam_val, rho);
            v.h = interp(law.h_rho, law.h_val, rho);
            break;
    }
    if (v.lambda < 0) {
        v.lambda = 0;
        v.clamped = true;
    }
    if (v.h < 0) {
        v.h = 0;
        v.clamped = true;
    }
    return v;
}

TrajectorySolution solve_trajectory(const TrajectoryConfig& cfg, RngStream& rng) {
    cfg.law.validate();
    cfg.fixed.validate();
    cfg.geom.validate();
    if (!(cfg.T > 0)) throw std::invalid_argument("solve_trajectory: T must be positive");
    if (cfg.dt_grid <= 0)
        throw std::invalid_argument("solve_trajectory: dt_grid must be positive");
    if (cfg.replicas < 2)
        throw std::invalid_argument("solve_trajectory: need >= 2 replicas");
    if (!(cfg.initial_density >= 0 && cfg.initial_density <= 1))
        throw std::invalid_argument("solve_trajectory: initial density outside [0,1]");
    if (cfg.tol <= 0 || cfg.max_sweeps < 1 || cfg.window_sweep_cap < 2 ||
        cfg.initial_window <= 0)
        throw std::invalid_argument("solve_trajectory: bad iteration knobs");

    const double dt = cfg.dt_grid;
    const int n_cells =
        std::max(1, static_cast<int>(std::ceil(cfg.T / dt - 1e-9)));
    const int R = cfg.replicas;

    TrajectorySolution sol;
    sol.dt_grid = dt;
    sol.rho.assign(static_cast<std::size_t>(n_cells), 0.0);
    sol.lambda.assign(static_cast<std::size_t>(n_cells), 0.0);
    sol.h.assign(static_cast<std::size_t>(n_cells), 0.0);
    sol.rho_ci.assign(static_cast<std::size_t>(n_cells), 0.0);
    sol.converged = true;

    // Frozen per-replica streams; initial states drawn from the product law.
    const std::uint64_t master = rng.next_u64();
    std::vector<RngStream> streams;
    std::vector<Configuration> states;
    streams.reserve(static_cast<std::size_t>(R));
    states.reserve(static_cast<std::size_t>(R));
    for (int i = 0; i < R; ++i) {
        streams.emplace_back(derive_seed(master, static_cast<std::uint64_t>(i)));
        Configuration c = Configuration::filled(cfg.geom, kZero);
        for (SiteState& s : c.states)
            if (streams.back().uniform() < cfg.initial_density) s = kPlus;
        states.push_back(std::move(c));
    }

    int w_cells = std::clamp(static_cast<int>(std::llround(cfg.initial_window / dt)),
                             1, n_cells);
    double rho_boundary = cfg.initial_density;
    int c0 = 0;

    std::vector<std::vector<double>> rep_cells(static_cast<std::size_t>(R));
    std::vector<Configuration> end_states(static_cast<std::size_t>(R));
    std::vector<RngStream> end_streams(static_cast<std::size_t>(R), RngStream(0));
    const double tq = stats::t_quantile(R - 1, 0.5 + cfg.conf / 2.0);

    while (c0 < n_cells) {
        int c1 = std::min(c0 + w_cells, n_cells);

        const auto seed_window = [&](int a, int b) {
            const LawValue lv = eval_law(cfg.law, rho_boundary);
            sol.clamped = sol.clamped || lv.clamped;
            for (int k = a; k < b; ++k) {
                sol.lambda[static_cast<std::size_t>(k)] = lv.lambda;
                sol.h[static_cast<std::size_t>(k)] = lv.h;
            }
        };
        seed_window(c0, c1);

        double prev_res = std::numeric_limits<double>::infinity();
        double res_w = std::numeric_limits<double>::infinity();
        int wsweeps = 0;
        std::vector<double> rho_mean;

        for (;;) {
            RateSchedule sched;
            sched.dt_grid = dt;
            sched.constants = cfg.fixed;
            sched.lambda_of_t.assign(sol.lambda.begin() + c0, sol.lambda.begin() + c1);
            sched.h_of_t.assign(sol.h.begin() + c0, sol.h.begin() + c1);
            const double start = c0 * dt;
            const double end = (c1 == n_cells) ? cfg.T : c1 * dt;
            const int W = c1 - c0;

            for (int i = 0; i < R; ++i) {
                RngStream r = streams[static_cast<std::size_t>(i)];  // frozen copy
                SimResult sr = run(states[static_cast<std::size_t>(i)], sched,
                                   end - start, r, -1.0);
                sr.cell_rho.resize(static_cast<std::size_t>(W),
                                   sr.cell_rho.empty() ? 0.0 : sr.cell_rho.back());
                rep_cells[static_cast<std::size_t>(i)] = std::move(sr.cell_rho);
                end_states[static_cast<std::size_t>(i)] = std::move(sr.final);
                end_streams[static_cast<std::size_t>(i)] = r;
            }
            ++sol.sweeps;
            ++wsweeps;

            rho_mean.assign(static_cast<std::size_t>(W), 0.0);
            for (int i = 0; i < R; ++i)
                for (int k = 0; k < W; ++k)
                    rho_mean[static_cast<std::size_t>(k)] +=
                        rep_cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
            for (int k = 0; k < W; ++k)
                rho_mean[static_cast<std::size_t>(k)] /= static_cast<double>(R);

            res_w = 0;
            for (int k = 0; k < W; ++k) {
                const LawValue lv =
                    eval_law(cfg.law, rho_mean[static_cast<std::size_t>(k)]);
                sol.clamped = sol.clamped || lv.clamped;
                res_w = std::max(
                    {res_w,
                     std::abs(lv.lambda - sol.lambda[static_cast<std::size_t>(c0 + k)]),
                     std::abs(lv.h - sol.h[static_cast<std::size_t>(c0 + k)])});
                sol.lambda[static_cast<std::size_t>(c0 + k)] = lv.lambda;
                sol.h[static_cast<std::size_t>(c0 + k)] = lv.h;
            }
            if (res_w < cfg.tol) break;  // window settled
            if (sol.sweeps >= cfg.max_sweeps) {
                sol.converged = false;
                break;
            }

            const double contraction = res_w / prev_res;  // first sweep: /inf = 0
            prev_res = res_w;
            const bool stalled = wsweeps >= 2 && contraction >= 0.5;
            const bool capped = wsweeps >= cfg.window_sweep_cap;
            if ((stalled || capped) && c1 - c0 > 1) {
                w_cells = (c1 - c0 + 1) / 2;
                c1 = c0 + w_cells;
                seed_window(c0, c1);
                prev_res = std::numeric_limits<double>::infinity();
                wsweeps = 0;
                continue;
            }
            if (capped) {  // one-cell window that will not contract
                sol.converged = false;
                break;
            }
        }

        const int W = c1 - c0;
        for (int k = 0; k < W; ++k) {
            const double m = rho_mean[static_cast<std::size_t>(k)];
            sol.rho[static_cast<std::size_t>(c0 + k)] = m;
            double ss = 0;
            for (int i = 0; i < R; ++i) {
                const double d =
                    rep_cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] -
                    m;
                ss += d * d;
            }
            sol.rho_ci[static_cast<std::size_t>(c0 + k)] =
                tq * std::sqrt(ss / (R - 1.0)) / std::sqrt(static_cast<double>(R));
        }
        sol.residual = std::max(sol.residual, res_w);
        std::swap(states, end_states);
        std::swap(streams, end_streams);
        rho_boundary = rho_mean.back();
        sol.window_ends.push_back((c1 == n_cells) ? cfg.T : c1 * dt);
        sol.window_sweeps.push_back(wsweeps);
        c0 = c1;
    }
    return sol;
}

StationaryFixedPoint solve_stationary(const StationaryConfig& cfg, RngStream& rng) {
    cfg.law.validate();
    cfg.fixed.validate();
    cfg.geom.validate();
    if (!(cfg.fixed.kappa > 0) || !(cfg.fixed.kappa_tilde_or_star > 0) ||
        !(cfg.fixed.h_tilde > 0))
        throw std::invalid_argument(
            "solve_stationary: fixed rates must be strictly positive");
    if (!(cfg.damping > 0 && cfg.damping <= 1))
        throw std::invalid_argument("solve_stationary: damping outside (0,1]");
    if (cfg.tol <= 0 || cfg.max_iters < 1)
        throw std::invalid_argument("solve_stationary: bad iteration knobs");

    StationaryFixedPoint fp;
    fp.law_touches_zero = cfg.law.touches_zero();

    double lam, h;
    if (cfg.init_lambda >= 0 && cfg.init_h >= 0) {
        lam = cfg.init_lambda;
        h = cfg.init_h;
    } else {
        const LawValue lv = eval_law(cfg.law, 0.5);
        lam = lv.lambda;
        h = lv.h;
        fp.clamped = fp.clamped || lv.clamped;
    }

    const std::uint64_t master = rng.next_u64();
    RngStream iter_stream(derive_seed(master, 0));
    RngStream fresh_stream(derive_seed(master, 1));

    const auto rho_at = [&](double l, double hh, RngStream& st) {
        if (hh <= 0) {
            // No spontaneous births: on a finite lattice the 1's die out, so
            // the stationary density of 1's is 0 exactly.
            DensityEstimate zero;
            zero.conf = cfg.conf;
            return zero;
        }
        RateSet r = cfg.fixed;
        r.lambda = l;
        r.h = hh;
        return stationary_density(r, cfg.geom, cfg.burn_in, cfg.sample_time, st,
                                  cfg.batches, cfg.conf);
    };

    for (int it = 1; it <= cfg.max_iters; ++it) {
        const DensityEstimate est = rho_at(lam, h, iter_stream);
        const LawValue target = eval_law(cfg.law, est.mean);
        fp.clamped = fp.clamped || target.clamped;
        fp.trace.push_back({lam, h, est.mean});
        fp.iters = it;
        const double disc =
            std::max(std::abs(lam - target.lambda), std::abs(h - target.h));
        const double new_l = (1 - cfg.damping) * lam + cfg.damping * target.lambda;
        const double new_h = (1 - cfg.damping) * h + cfg.damping * target.h;
        const double update = std::max(std::abs(new_l - lam), std::abs(new_h - h));
        lam = new_l;
        h = new_h;
        if (disc < cfg.tol && update < cfg.tol) {
            fp.converged = true;
            break;
        }
    }

    fp.lambda_star = lam;
    fp.h_star = h;
    const DensityEstimate fresh = rho_at(lam, h, fresh_stream);
    const LawValue at_fresh = eval_law(cfg.law, fresh.mean);
    fp.rho_star = fresh.mean;
    fp.rho_ci = fresh.ci_halfwidth;
    fp.residual =
        std::max(std::abs(lam - at_fresh.lambda), std::abs(h - at_fresh.h));
    return fp;
}

std::vector<StationaryFixedPoint> solve_stationary_multi(
    const StationaryConfig& cfg, const std::vector<std::array<double, 2>>& starts,
    RngStream& rng) {
    std::vector<StationaryFixedPoint> out;
    out.reserve(starts.size());
    for (const auto& s : starts) {
        StationaryConfig c = cfg;
        c.init_lambda = s[0];
        c.init_h = s[1];
        out.push_back(solve_stationary(c, rng));
    }
    return out;
}

}  // namespace contact
