// Cluster statistics of the state-1 subgraph, rectangle crossing events, tail
// classification of the origin-cluster size, and the finite-size phase
// decision built from crossing probabilities.
#pragma once

#include <cstdint>
#include <vector>

#include "contact/lattice.hpp"
#include "contact/rng.hpp"

namespace contact {

// Connected components of the sites in state 1 under nearest-neighbor
// adjacency (torus adjacency wraps; rectangle exteriors are not part of the
// graph).  Labels are dense ids 0..cluster_count()-1 in first-visit site
// order; sites not in state 1 carry label -1.  A cluster "wraps" an axis when
// its union-find displacement closes a cycle with nonzero winding, i.e. it is
// connected the long way around the torus.
struct ClusterReport {
    // Bulk samplers may drop `labels` to keep memory flat; every derived
    // statistic below (and tail_estimate) reads n_sites instead.
    std::int64_t n_sites = 0;
    std::vector<std::int32_t> labels;   // per site; -1 = not in state 1
    std::vector<std::int64_t> sizes;    // per cluster id
    std::vector<std::uint8_t> wraps_x;  // per cluster id (always 0 off-torus)
    std::vector<std::uint8_t> wraps_y;
    std::int64_t origin_size = 0;       // cluster of site (0,0); 0 if not in state 1
    bool origin_wraps = false;
    bool any_wrap = false;

    int cluster_count() const { return static_cast<int>(sizes.size()); }
    bool cluster_wraps(int id) const {
        return wraps_x[static_cast<std::size_t>(id)] ||
               wraps_y[static_cast<std::size_t>(id)];
    }
};

ClusterReport label_clusters(const Configuration& config);

enum class CrossDir { Horizontal, Vertical };

// Inclusive crossing window: (m+1) x (n+1) sites anchored at (x0, y0).  On a
// torus the anchor may sit anywhere (coordinates are read mod the lattice
// size) but the window itself never wraps: its extent must not exceed the
// lattice, and adjacency inside the window is plain nearest-neighbor on the
// cut-open block.
struct CrossWindow {
    int x0 = 0, y0 = 0;
    int m = 0, n = 0;
};

// True iff a nearest-neighbor path of 1's inside the window joins its left
// and right boundary columns (Horizontal) or its top and bottom boundary rows
// (Vertical).  Errors when the window extent exceeds the geometry (or falls
// outside a rectangle's bounds).
bool crossing(const Configuration& config, const CrossWindow& rect, CrossDir direction);

enum class TailClass { Exponential, Subexponential, Inconclusive };

struct TailEstimate {
    std::vector<std::int64_t> n_grid;
    std::vector<double> p_hat;         // empirical tail of the origin-cluster size
    std::vector<double> ci_lo, ci_hi;  // two-sided intervals per grid point
    // Log-linear fit of log p_hat over the resolvable grid range.
    double rate = 0;  // fitted decay c in p ~ exp(-c n); positive = decaying
    double rate_ci_half = 0;
    double r_squared = 0;
    int fit_points = 0;
    TailClass classification = TailClass::Inconclusive;
    bool degenerate = false;   // tail dies below resolution; see tail_estimate
    std::int64_t censored = 0; // samples removed for wrapping (right-censored)
    std::int64_t samples = 0;  // sample count after censoring
};

// Tail of the origin-cluster size across sample reports at the thresholds in
// n_grid (strictly increasing, >= 1).  Requires >= 100 samples.
//
// Censoring: a finite lattice truncates large clusters, so samples whose
// origin cluster wraps the torus are right-censored at lattice scale; they
// are removed from the tail sample set and counted in `censored`.
//
// With all_origins=true the per-sample statistic is the fraction of sites
// whose cluster has size >= n (translation invariance on the torus makes the
// mean identical to the origin indicator, at lower variance); sites in
// wrapping clusters leave both numerator and denominator, and a sample is
// censored entirely only when every site sits in a wrapping cluster.
// Samples remain the independence unit for the CIs either way.
//
// Fit and classification: the fit range is the set of grid points with
// p_hat in [10/samples, 0.5].  With >= 3 points in range, classification is
//   Subexponential  if the fitted decay rate over the upper half of the range
//                   is below 0.5x the rate over the lower half, the latter
//                   itself significantly positive (curvature surrogate: a
//                   liminf is not estimable from finite data);
//   Exponential     else if r^2 >= 0.98 and the full-range rate is positive
//                   with its 99% CI excluding 0;
//   Inconclusive    otherwise.
// With < 3 points in range: Exponential with degenerate=true when the tail
// reaches below resolution (some p_hat < 10/samples), else Inconclusive
// (everything still above 0.5).  Fewer than 10 usable samples after
// censoring: Inconclusive.
TailEstimate tail_estimate(const std::vector<ClusterReport>& samples,
                           const std::vector<std::int64_t>& n_grid,
                           bool all_origins = false, double conf = 0.99);

enum class PhaseDecision { Subcritical, Supercritical, Neither };

// Indicator draws for the scale-n decision window: a (3n+1) x (n+1) site
// block, vertical crossings (the short way) and horizontal crossings (the
// long way) of the same window.
struct CrossingSamples {
    std::int64_t v_hits = 0;
    std::int64_t h_hits = 0;
    std::int64_t count = 0;
};

struct FiniteSizeResult {
    PhaseDecision decision = PhaseDecision::Neither;
    double v_upper = 1;  // upper CI bound of P(vertical crossing)
    double h_lower = 0;  // lower CI bound of P(horizontal crossing)
    double eps_hat = 0;
    int n = 0;
};

// Two-clause decision heuristic at scale n (not a proof):
//   Subcritical   if the upper Wilson bound of P(V) is below eps_hat;
//   Supercritical if the lower Wilson bound of P(H) is above 1 - eps_hat;
//   Neither       otherwise.
// Checked in that order.  Errors on fewer than 10 draws.  Note the decision
// resolves eps_hat only when count is large enough for the interval to reach
// it: with all-zero draws the upper bound is z^2/(count + z^2), so e.g.
// eps_hat = 0.05 at 99% needs count > ~127.
FiniteSizeResult finite_size_check(const CrossingSamples& samples, int n,
                                   double eps_hat, double conf = 0.99);

// Chained crossing draws from the upper stationary regime: an event-driven
// run started from all-1, burned in for burn_in time units, then sampled
// every gap time units; each sampled state contributes one window draw at a
// uniformly random anchor (torus) or the fixed corner (rectangle).
CrossingSamples sample_crossings(const RateSet& rates, const Geometry& geom, int n,
                                 int count, double burn_in, double gap,
                                 RngStream& rng);

struct ScanProbe {
    double h = 0;
    PhaseDecision decision = PhaseDecision::Neither;
    double v_upper = 1;
    double h_lower = 0;
};

struct ScanEntry {
    double lambda = 0;
    double h_lo = 0;        // largest probed h that was not Supercritical
    double h_hi = 0;        // smallest probed h that was Supercritical
    double h_perc_hat = 0;  // bracket midpoint (infinity when not bracketed)
    bool bracketed = false;  // false: no Supercritical h found in [0, h_max]
    // Already Supercritical at h = 0: the degenerate bracket [0, tol].
    bool super_at_zero = false;
    std::vector<ScanProbe> trace;
};

struct ScanResult {
    std::vector<ScanEntry> entries;
    int n = 0;
    double eps_hat = 0;
    // Post-hoc consistency of the brackets across the lambda grid:
    // monotone_ok:  h(lambda) nonincreasing is consistent with every adjacent
    //               bracket pair (lo_{i+1} <= hi_i);
    // envelope_ok:  h(lambda + a) >= h(lambda) - 4a consistent within bracket
    //               widths (hi_{i+1} >= lo_i - 4a).
    // Pairs with an unbracketed side are skipped.
    bool monotone_ok = true;
    bool envelope_ok = true;
};

struct ScanConfig {
    RateSet rates;  // model and fixed rates; lambda and h are overwritten
    std::vector<double> lambda_grid;  // increasing
    Geometry geom;
    int n = 8;
    double eps_hat = 0.05;
    double bisection_tol = 0.05;
    double h_max = 4;
    int samples_per_probe = 300;
    double burn_in = 30;
    double sample_gap = 2;
    double conf = 0.99;
};

// For each lambda, bisect on h using the scale-n decision as the
// supercritical/subcritical surrogate.  A probe counts as "above threshold"
// exactly when the decision is Supercritical, so the bracket encloses the
// scale-n pseudo-threshold inf{h : lower CI of P(H) > 1 - eps_hat}, which
// inherits the monotonicity and 4a-Lipschitz envelope of the true threshold
// by pathwise domination at fixed n.  Entries where h_max never went
// Supercritical come back with bracketed=false (lo = h_max).
ScanResult h_perc_scan(const ScanConfig& cfg, RngStream& rng);

}  // namespace contact
