// Experiment orchestration: JSON experiment specs, seeded dispatch into the
// simulation/analysis modules, self-describing CSV/JSON artifacts, and the
// coupled sharpness scan over the up-mass grid.
//
// Reproducibility contract: the master seed fully determines every output
// byte.  Component/replica i of master seed s draws from the stream seeded
// with derive_seed(s, i) (see rng.hpp), so changing a replica count never
// reshuffles earlier streams.  Outputs are written atomically (temp file +
// rename) and each carries the spec hash, the seed, and the artifact version
// in its header; no timestamps, so identical spec + seed reruns are
// byte-identical.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "contact/ddcp.hpp"
#include "contact/lattice.hpp"
#include "contact/percolation.hpp"
#include "contact/rng.hpp"

namespace contact {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kArtifactVersion = "0.1.0";

enum class ExperimentKind {
    Stationary,      // replica farm of stationary-density estimates
    Tails,           // origin-cluster tail classification from chain samples
    Crossings,       // crossing tallies + finite-size decision at one scale
    Scan,            // h_perc bisection scan over a lambda grid
    DdcpTrajectory,  // windowed Picard schedule solution
    DdcpStationary,  // damped fixed point of (lambda, h) vs stationary density
    CoupleCheck,     // seeded monotone-coupling audits
    OracleCheck,     // exact-oracle invariant battery (tiny lattices)
};

const char* experiment_name(ExperimentKind k);

// One experiment = one JSON document.  Only --seed and --out may override it
// from the CLI (provenance stays trivial: hash the document, log the seed).
struct ExperimentSpec {
    ExperimentKind experiment = ExperimentKind::Stationary;
    Geometry geom;
    std::uint64_t master_seed = 1;
    std::string out_dir = "out";

    // Rate inputs; which ones are required depends on the experiment.
    bool has_rates = false;
    RateSet rates;  // constant-rate experiments; fixed fields of DDCP runs
    bool has_qparam = false;
    RateSet q_base;              // rescaled on parse
    std::vector<double> q_grid;  // increasing up-mass values
    bool has_law = false;
    DensityLaw law;

    // Generic sampling knobs.
    int replicas = 4;
    double burn_in = 50;
    double horizon = 200;  // per-replica sampling time (stationary experiments)
    double sample_dt = 2;  // gap between chain samples
    int batches = 32;
    double conf = 0.99;

    // tails / crossings / sharpness.
    int samples = 500;
    bool all_origins = false;
    std::vector<std::int64_t> n_grid;  // tail thresholds; empty = automatic
    std::vector<int> n_list = {8};     // decision scales
    double eps_hat = 0.05;

    // scan.
    std::vector<double> lambda_grid;
    double bisection_tol = 0.05;
    double h_max = 4;

    // ddcp.
    double dt_grid = 0.1;
    double tol = 0.01;
    int max_sweeps = 200;  // Picard budget / fixed-point iteration cap
    double initial_density = 0.5;
    double damping = 0.5;

    // couple_check.
    int pairs = 50;

    // Non-fatal validation notes (e.g. a zero spontaneous rate where the
    // stationarity hypotheses want positivity).
    std::vector<std::string> warnings;

    std::string canonical;  // whitespace-free, key-sorted document (hash input)
};

// Parse and validate a spec document (or file).  Unknown keys and
// experiment/input mismatches throw std::invalid_argument with a message
// suitable for the machine-readable error report.
ExperimentSpec parse_spec(const std::string& json_text);
ExperimentSpec load_spec(const std::string& path);

// FNV-1a 64 over the canonical document, as "fnv1a64:<16 hex digits>".
std::string spec_hash(const ExperimentSpec& spec);

struct RunOutcome {
    int exit_code = 0;  // 0 ok, 2 runtime failure, 3 failed check battery
    std::vector<std::string> files;  // artifacts written (in write order)
    std::string message;
};

// Execute the experiment and write its artifacts under spec.out_dir.
RunOutcome run_experiment(const ExperimentSpec& spec);

// Exact-oracle invariant battery (generator structure, stationarity,
// semigroup property, marginal-distance bounds) on 2x2 tori; rows print to
// `lines` as "[PASS]/[FAIL] name (measured ...)".  Returns true iff all pass.
bool oracle_check_battery(std::vector<std::string>& lines);

// ---------------------------------------------------------------------------
// Sharpness scan: the q-profile of tail classifications and finite-size
// decisions, with every q driven by the SAME graphical symbols (one coupled
// timeline segment per sampling step, replayed at each q).  Pathwise
// monotonicity in q then makes crossing tallies monotone across the grid, so
// the decision profile is ordered by construction rather than by luck.
// ---------------------------------------------------------------------------

struct SharpnessOptions {
    double burn_in = 30;  // rounded up to a whole number of gap segments
    double gap = 2;       // time between samples = timeline segment length
    bool all_origins = true;
    double eps_hat = 0.05;
    double conf = 0.99;
    std::vector<std::int64_t> n_grid;  // tail thresholds; empty = automatic
};

struct SharpnessEntry {
    double q = 0;
    double rho = 0;  // mean density of 1's over the samples
    TailEstimate tail;
    std::vector<FiniteSizeResult> decisions;  // one per scale in n_list
};

struct SharpnessReport {
    std::vector<SharpnessEntry> entries;  // one per q, grid order
    std::vector<int> n_list;
    // No Supercritical decision at a q below a Subcritical decision, at any
    // scale.  The coupling makes a violation impossible up to the V-vs-H
    // asymmetry of the decision rule, so false here is reportable evidence.
    bool ordered = true;
};

// Chains start from all-1 and burn in before sampling; every sample applies
// one fresh shared symbol segment to all per-q states, then draws one
// crossing window per scale at a shared anchor.  samples >= 100 (tail fit).
SharpnessReport sharpness_scan(const QParameterization& base,
                               const std::vector<double>& q_grid,
                               const Geometry& geom, const std::vector<int>& n_list,
                               int samples, const SharpnessOptions& opts,
                               RngStream& rng);

// Threshold ladder 1, 2, 3, ... growing by ~sqrt(2) up to half the lattice.
std::vector<std::int64_t> default_tail_grid(int sites);

}  // namespace contact
