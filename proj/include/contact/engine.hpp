// Exact continuous-time simulation of Models A and B (Gillespie-style event
// selection) with constant or piecewise-constant time-varying rates.
//
// Event selection keeps per-site propensity sums in an indexed tree with
// O(log N) updates; a rebuild-from-scratch audit every 2^20 events bounds
// floating point drift.  Piecewise-constant schedules are simulated exactly:
// clocks are regenerated at every grid boundary (memorylessness makes the
// discarded residual clock exact, no thinning needed).
#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "contact/lattice.hpp"
#include "contact/rng.hpp"

namespace contact {

// Piecewise-constant schedule for the density-driven fields (lambda, h) on a
// uniform grid; the remaining fields are constant.  Values are held constant
// within each cell; queries beyond the grid clamp to the last cell.
struct RateSchedule {
    double dt_grid = 1.0;
    std::vector<double> lambda_of_t;  // per cell, nonnegative
    std::vector<double> h_of_t;       // per cell, same length
    RateSet constants;                // lambda/h fields ignored

    static RateSchedule constant(const RateSet& r) {
        RateSchedule s;
        s.dt_grid = 1.0;
        s.lambda_of_t = {r.lambda};
        s.h_of_t = {r.h};
        s.constants = r;
        return s;
    }

    int cells() const { return static_cast<int>(lambda_of_t.size()); }

    RateSet at(double t) const {
        int c = (t <= 0 || dt_grid <= 0) ? 0 : static_cast<int>(t / dt_grid);
        c = std::min(c, cells() - 1);
        RateSet r = constants;
        r.lambda = lambda_of_t[static_cast<std::size_t>(c)];
        r.h = h_of_t[static_cast<std::size_t>(c)];
        return r;
    }

    void validate() const;
};

struct EventDescriptor {
    bool absorbed = false;  // total rate 0: no transition occurred
    bool censored = false;  // waiting time exceeded the cap: no transition applied
    int site = -1;
    SiteState from = 0;
    SiteState to = 0;
    double dt = 0;  // waiting time (exponential in the total rate)
};

struct SimResult {
    Configuration final;
    std::int64_t event_count = 0;
    double elapsed = 0;
    std::vector<double> trace_times;  // sample times (model time)
    std::vector<double> trace_rho;    // spatial density of 1's at those times
    // Time-averaged density of 1's over each schedule cell visited before the
    // horizon (the last visited cell averages up to T, wherever it lands).
    std::vector<double> cell_rho;
};

// Total propensity of one site in the given configuration (sum over its
// enabled transitions from the model's rate table; neighbor terms are
// slot-counted).
double site_propensity(const Configuration& cfg, const RateSet& rates, int site);

// Stateful simulator holding the indexed propensity structure.
class Engine {
  public:
    Engine(Configuration initial, RateSet rates);

    const Configuration& config() const { return cfg_; }
    const RateSet& rates() const { return rates_; }
    double total_rate() const;
    std::int64_t event_count() const { return events_; }

    // Current spatial density of 1's, O(1).
    double density() const;

    // Replace the rate set (grid boundary); rebuilds all propensities.
    void set_rates(const RateSet& rates);

    // Advance by one transition.  Absorbing configurations return a
    // distinguished Absorbed descriptor and change nothing.
    EventDescriptor step(RngStream& rng);

    // Like step, but a waiting time beyond max_dt applies nothing and comes
    // back censored (run() uses this for exact clock regeneration at grid
    // boundaries).
    EventDescriptor step_capped(RngStream& rng, double max_dt);

    // Recompute every per-site propensity from scratch, replace the
    // incrementally maintained values, and return the largest absolute
    // discrepancy found.  Called automatically every 2^20 events.
    double audit_rebuild();
    double max_audit_drift() const { return max_drift_; }

  private:
    void refresh_site(int site);

    Configuration cfg_;
    RateSet rates_;
    std::vector<double> tree_;  // binary heap-layout sum tree over sites
    int leaves_ = 0;
    int ones_ = 0;
    std::int64_t events_ = 0;
    double max_drift_ = 0;
};

// Single transition from a configuration (one-shot convenience around a
// temporary Engine).
EventDescriptor step(Configuration& config, const RateSet& rates, RngStream& rng);

// Exact trajectory under a piecewise-constant schedule up to horizon T, with
// the density of 1's sampled every sample_dt (sample_dt <= 0 records only the
// endpoints).
SimResult run(const Configuration& initial, const RateSchedule& schedule, double T,
              RngStream& rng, double sample_dt);

struct DensityEstimate {
    double mean = 0;
    double ci_halfwidth = 0;  // two-sided, Student-t over batch means
    int batches = 0;
    double conf = 0.99;
};

// Stationary probability that a site is 1, estimated from the all-1 initial
// state by time averaging after burn_in; CI from batch means.
//
// Precondition (irreducibility of the finite chain): the spontaneous ladder
// rates must be strictly positive -- Model A: h, h_tilde, kappa, kappa_tilde;
// Model B: h, h_tilde, kappa_star.  Neighbor rates may be zero.
DensityEstimate stationary_density(const RateSet& rates, const Geometry& geom,
                                   double burn_in, double sample_time, RngStream& rng,
                                   int batches = 32, double conf = 0.99);

}  // namespace contact
