#include "contact/engine.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "contact/stats.hpp"

namespace contact {

namespace {

constexpr std::int64_t kAuditPeriod = std::int64_t{1} << 20;

// Enabled transitions of one site: at most two (target, rate) pairs.
struct SiteMoves {
    int count = 0;
    SiteState to[2] = {0, 0};
    double rate[2] = {0, 0};
    double total = 0;

    void add(SiteState target, double r) {
        if (r <= 0) return;
        to[count] = target;
        rate[count] = r;
        total += r;
        ++count;
    }
};

SiteMoves site_moves(const Configuration& cfg, const RateSet& r, int site) {
    SiteMoves m;
    const SiteState s = cfg.at(site);
    if (r.model == Model::A) {
        if (s == kPlus) {
            m.add(kZero, r.kappa);
        } else if (s == kZero) {
            m.add(kMinus, r.kappa_tilde_or_star);
            m.add(kPlus, r.h + r.lambda * cfg.ones_in_neighborhood(site));
        } else {
            m.add(kZero, r.h_tilde + r.lambda_tilde * cfg.ones_in_neighborhood(site));
        }
    } else {
        if (s == kPlus) {
            m.add(kZero, r.kappa);
            m.add(kMinus, r.kappa_tilde_or_star);
        } else if (s == kZero) {
            m.add(kMinus, r.kappa_tilde_or_star);
            m.add(kPlus, r.h + r.lambda * cfg.ones_in_neighborhood(site));
        } else {
            m.add(kZero, r.h_tilde);
        }
    }
    return m;
}

}  // namespace

double site_propensity(const Configuration& cfg, const RateSet& rates, int site) {
    return site_moves(cfg, rates, site).total;
}

void RateSchedule::validate() const {
    if (dt_grid <= 0) throw std::invalid_argument("schedule: dt_grid must be positive");
    if (lambda_of_t.empty() || lambda_of_t.size() != h_of_t.size())
        throw std::invalid_argument("schedule: lambda/h grids empty or mismatched");
    for (double v : lambda_of_t)
        if (!(v >= 0) || !std::isfinite(v))
            throw std::invalid_argument("schedule: lambda values must be finite and >= 0");
    for (double v : h_of_t)
        if (!(v >= 0) || !std::isfinite(v))
            throw std::invalid_argument("schedule: h values must be finite and >= 0");
    constants.validate();
}

Engine::Engine(Configuration initial, RateSet rates)
    : cfg_(std::move(initial)), rates_(rates) {
    rates_.validate();
    cfg_.geom.validate();
    if (static_cast<int>(cfg_.states.size()) != cfg_.geom.sites())
        throw std::invalid_argument("engine: state array does not match geometry");
    for (SiteState s : cfg_.states)
        if (!valid_state(s)) throw std::invalid_argument("engine: invalid site state");
    ones_ = cfg_.count(kPlus);

    leaves_ = 1;
    while (leaves_ < cfg_.geom.sites()) leaves_ *= 2;
    tree_.assign(static_cast<std::size_t>(2 * leaves_), 0.0);
    audit_rebuild();
    max_drift_ = 0;  // the initial build is not drift
}

double Engine::total_rate() const { return tree_[1]; }

double Engine::density() const {
    return cfg_.states.empty() ? 0.0
                               : static_cast<double>(ones_) / static_cast<double>(cfg_.states.size());
}

void Engine::set_rates(const RateSet& rates) {
    rates.validate();
    if (rates.model != rates_.model)
        throw std::invalid_argument("engine: cannot switch model mid-run");
    rates_ = rates;
    const double drift = max_drift_;
    audit_rebuild();
    max_drift_ = drift;  // a rebuild after a rate change measures no drift
}

void Engine::refresh_site(int site) {
    int node = leaves_ + site;
    tree_[static_cast<std::size_t>(node)] = site_propensity(cfg_, rates_, site);
    for (node /= 2; node >= 1; node /= 2)
        tree_[static_cast<std::size_t>(node)] =
            tree_[static_cast<std::size_t>(2 * node)] + tree_[static_cast<std::size_t>(2 * node + 1)];
}

double Engine::audit_rebuild() {
    double drift = 0;
    const int n = cfg_.geom.sites();
    for (int i = 0; i < leaves_; ++i) {
        const double fresh = (i < n) ? site_propensity(cfg_, rates_, i) : 0.0;
        drift = std::max(drift, std::abs(tree_[static_cast<std::size_t>(leaves_ + i)] - fresh));
        tree_[static_cast<std::size_t>(leaves_ + i)] = fresh;
    }
    for (int node = leaves_ - 1; node >= 1; --node)
        tree_[static_cast<std::size_t>(node)] =
            tree_[static_cast<std::size_t>(2 * node)] + tree_[static_cast<std::size_t>(2 * node + 1)];
    max_drift_ = std::max(max_drift_, drift);
    return drift;
}

EventDescriptor Engine::step_capped(RngStream& rng, double max_dt) {
    const double total = tree_[1];
    EventDescriptor ev;
    if (total <= 0) {
        ev.absorbed = true;
        return ev;
    }
    ev.dt = rng.exponential(total);
    if (ev.dt > max_dt) {
        ev.censored = true;  // clock ran past the horizon; nothing applied
        return ev;
    }

    // Descend the sum tree on a uniform point in [0, total).
    double u = rng.uniform() * total;
    int node = 1;
    while (node < leaves_) {
        const double left = tree_[static_cast<std::size_t>(2 * node)];
        if (u < left) {
            node = 2 * node;
        } else {
            u -= left;
            node = 2 * node + 1;
        }
    }
    int site = node - leaves_;
    const int n = cfg_.geom.sites();
    if (site >= n) site = n - 1;  // floating point edge of the descent

    // Select the transition within the site from freshly computed moves.
    SiteMoves m = site_moves(cfg_, rates_, site);
    if (m.count == 0) {
        // Stale zero-rate leaf hit through rounding; repair and redraw the
        // site (the waiting time already drawn stays valid).
        refresh_site(site);
        return step_capped(rng, max_dt);
    }
    const double v = rng.uniform() * m.total;
    int choice = 0;
    if (m.count == 2 && v >= m.rate[0]) choice = 1;

    ev.site = site;
    ev.from = cfg_.at(site);
    ev.to = m.to[choice];
    cfg_.at(site) = ev.to;
    ones_ += (ev.to == kPlus) - (ev.from == kPlus);

    // The flip changes this site's propensity and, through the neighbor
    // counts, the propensities of every site it is a neighbor of (its own
    // 4 slots, by symmetry of the slot structure).
    refresh_site(site);
    if ((ev.from == kPlus) != (ev.to == kPlus)) {
        int touched[4];
        int n_touched = 0;
        for (const Neighbor& nb : neighbors(cfg_.geom, site)) {
            if (nb.exterior) continue;
            bool seen = false;
            for (int i = 0; i < n_touched; ++i) seen = seen || touched[i] == nb.site;
            if (!seen) touched[n_touched++] = nb.site;
        }
        for (int i = 0; i < n_touched; ++i) refresh_site(touched[i]);
    }

    if ((++events_ % kAuditPeriod) == 0) audit_rebuild();
    return ev;
}

EventDescriptor Engine::step(RngStream& rng) {
    return step_capped(rng, std::numeric_limits<double>::infinity());
}

EventDescriptor step(Configuration& config, const RateSet& rates, RngStream& rng) {
    Engine e(config, rates);
    EventDescriptor ev = e.step(rng);
    config = e.config();
    return ev;
}

SimResult run(const Configuration& initial, const RateSchedule& schedule, double T,
              RngStream& rng, double sample_dt) {
    schedule.validate();
    if (T < 0) throw std::invalid_argument("run: negative horizon");

    SimResult res;
    Engine eng(initial, schedule.at(0.0));
    res.trace_times.push_back(0.0);
    res.trace_rho.push_back(eng.density());

    // Index-based sample times avoid accumulation drift.
    std::int64_t sample_idx = 1;
    auto sample_time = [&]() {
        return (sample_dt > 0) ? sample_idx * sample_dt
                               : std::numeric_limits<double>::infinity();
    };

    double t = 0;
    int cell = 0;
    while (t < T) {
        const double cell_start = t;
        const double cell_end = (cell + 1 >= schedule.cells())
                                    ? T
                                    : std::min(T, (cell + 1) * schedule.dt_grid);
        double cell_integral = 0;
        while (t < cell_end) {
            const double rho_pre = eng.density();
            const EventDescriptor ev = eng.step_capped(rng, cell_end - t);
            const double t_next = (ev.absorbed || ev.censored) ? cell_end : t + ev.dt;
            cell_integral += rho_pre * (t_next - t);
            // Samples strictly inside (t, t_next) see the pre-jump state.
            while (sample_time() < t_next || (ev.absorbed && sample_time() <= t_next)) {
                if (sample_time() > T) break;
                res.trace_times.push_back(sample_time());
                res.trace_rho.push_back(rho_pre);
                ++sample_idx;
            }
            t = t_next;
            if (ev.absorbed || ev.censored) break;
        }
        res.cell_rho.push_back(cell_end > cell_start
                                   ? cell_integral / (cell_end - cell_start)
                                   : eng.density());
        if (t >= T) break;
        ++cell;
        // Mid-cell query sidesteps floating point on the boundary itself.
        eng.set_rates(schedule.at((cell + 0.5) * schedule.dt_grid));
    }

    res.final = eng.config();
    res.event_count = eng.event_count();
    res.elapsed = T;
    // Remaining samples (state is constant after the last event) and the
    // endpoint.
    while (sample_dt > 0 && sample_time() <= T + 1e-9 * std::max(1.0, T)) {
        res.trace_times.push_back(std::min(sample_time(), T));
        res.trace_rho.push_back(res.final.density_of_ones());
        ++sample_idx;
    }
    if (res.trace_times.back() < T) {
        res.trace_times.push_back(T);
        res.trace_rho.push_back(res.final.density_of_ones());
    }
    return res;
}

DensityEstimate stationary_density(const RateSet& rates, const Geometry& geom,
                                   double burn_in, double sample_time, RngStream& rng,
                                   int batches, double conf) {
    rates.validate();
    geom.validate();
    if (burn_in <= 0 || sample_time <= 0)
        throw std::invalid_argument(
            "stationary_density: burn_in and sample_time must be positive");
    if (batches < 2) throw std::invalid_argument("stationary_density: need >= 2 batches");

    const bool ok = (rates.model == Model::A)
                        ? (rates.h > 0 && rates.h_tilde > 0 && rates.kappa > 0 &&
                           rates.kappa_tilde_or_star > 0)
                        : (rates.h > 0 && rates.h_tilde > 0 && rates.kappa_tilde_or_star > 0);
    if (!ok)
        throw std::invalid_argument(
            "stationary_density: spontaneous ladder rates must be strictly positive "
            "(unique stationary law needs an irreducible chain)");

    Engine eng(Configuration::filled(geom, kPlus), rates);

    // Burn-in: advance time without statistics.
    double t = 0;
    while (t < burn_in) {
        const EventDescriptor ev = eng.step(rng);
        if (ev.absorbed) throw std::runtime_error("stationary_density: absorbed (unreachable)");
        t += ev.dt;
    }

    // Time-weighted density integral per batch.
    const double batch_len = sample_time / batches;
    std::vector<double> batch_int(static_cast<std::size_t>(batches), 0.0);
    double s = 0;  // time inside the sampling window
    double rho = eng.density();
    while (s < sample_time) {
        const EventDescriptor ev = eng.step(rng);
        if (ev.absorbed) throw std::runtime_error("stationary_density: absorbed (unreachable)");
        const double s_next = std::min(s + ev.dt, sample_time);
        // Spread the constant-state interval [s, s_next) over the batches.
        double a = s;
        while (a < s_next) {
            const int b = std::min(batches - 1, static_cast<int>(a / batch_len));
            const double b_end = std::min(s_next, (b + 1) * batch_len);
            batch_int[static_cast<std::size_t>(b)] += (b_end - a) * rho;
            a = b_end;
        }
        s += ev.dt;
        rho = eng.density();
    }

    DensityEstimate est;
    est.batches = batches;
    est.conf = conf;
    double mean = 0;
    for (double bi : batch_int) mean += bi;
    mean /= sample_time;
    est.mean = mean;
    double ss = 0;
    for (double bi : batch_int) {
        const double bm = bi / batch_len;
        ss += (bm - mean) * (bm - mean);
    }
    const double sd = std::sqrt(ss / (batches - 1));
    est.ci_halfwidth =
        stats::t_quantile(batches - 1, 0.5 + conf / 2.0) * sd / std::sqrt(batches);
    return est;
}

}  // namespace contact
