// Density-driven variants: the birth rates (lambda, h) are functions of the
// instantaneous global density of 1's.  Trajectory solutions come from a
// Picard iteration over short time windows (simulate under a frozen schedule,
// update the schedule through the law, repeat until the schedule stops
// moving); stationary points from a damped fixed-point iteration on
// (lambda, h) against the stationary density.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "contact/engine.hpp"
#include "contact/lattice.hpp"
#include "contact/rng.hpp"

namespace contact {

enum class LawKind { Kefi, Constant, Tabulated };

struct LawValue {
    double lambda = 0;
    double h = 0;
    bool clamped = false;  // a negative evaluation was clamped to 0
};

// Density-to-rate law (Lambda, H): [0,1] -> rates.
//   Kefi:      Lambda(rho) = beta*(1-delta)/4 * (epsilon - g*rho)
//              H(rho)      = beta*delta*rho * (epsilon - g*rho)
//              with beta > 0, epsilon > 0, g >= 0, delta in (0,1).
//   Constant:  Lambda = lambda0, H = h0 (both >= 0).
//   Tabulated: linear interpolation on strictly increasing rho grids that
//              start at 0 and end at 1; values must be nonnegative (laws that
//              are negative by construction are rejected here, while a Kefi
//              law that dips negative at large rho is clamped at evaluation).
struct DensityLaw {
    LawKind kind = LawKind::Constant;
    double beta = 0, delta = 0, epsilon = 0, g = 0;  // Kefi
    double lambda0 = 0, h0 = 0;                      // Constant
    std::vector<double> lam_rho, lam_val;            // Tabulated
    std::vector<double> h_rho, h_val;

    static DensityLaw kefi(double beta, double delta, double epsilon, double g);
    static DensityLaw constant(double lambda0, double h0);
    static DensityLaw tabulated(std::vector<double> lam_rho,
                                std::vector<double> lam_val,
                                std::vector<double> h_rho, std::vector<double> h_val);

    void validate() const;

    // Upper bound on max(|dLambda/drho|, |dH/drho|) over [0,1]; contraction
    // diagnostics only.
    double lipschitz() const;

    // True when Lambda or H reaches 0 somewhere on [0,1] (every Kefi law:
    // H(0) = 0).  The stationary solver's positivity hypothesis fails then;
    // it proceeds and flags instead of erroring.
    bool touches_zero() const;
};

// Exact evaluation (Kefi/Constant) or interpolation (Tabulated); rho outside
// [0,1] is an error.  Negative values clamp to 0 with the flag set.
LawValue eval_law(const DensityLaw& law, double rho);

struct TrajectoryConfig {
    DensityLaw law;
    RateSet fixed;  // model and non-driven rates; lambda/h are overwritten
    // Initial law: product measure, each site 1 with this probability, else 0.
    double initial_density = 0;
    Geometry geom;
    double T = 1;
    double dt_grid = 0.1;
    int replicas = 16;
    double tol = 0.01;    // sup-norm schedule change declaring a window done
    int max_sweeps = 200;  // total sweep budget (each window still gets one)
    double initial_window = 1.0;  // model-time window length tried first
    int window_sweep_cap = 20;    // per-window sweeps before a forced halving
    double conf = 0.99;           // per-cell CI level on rho
};

struct TrajectorySolution {
    double dt_grid = 0;
    std::vector<double> rho;     // per cell: ensemble x spatial x in-cell mean
    std::vector<double> lambda;  // per cell; equals law(rho) exactly on report
    std::vector<double> h;
    std::vector<double> rho_ci;  // per-cell CI halfwidth across replicas
    double residual = 0;  // largest final sup-norm schedule change per window
    int sweeps = 0;       // total across windows
    bool converged = false;
    bool clamped = false;
    std::vector<double> window_ends;  // model-time right edge per window
    std::vector<int> window_sweeps;   // sweeps spent on each window
};

// Picard iteration with frozen per-replica streams (common random numbers):
// within a window every sweep restarts each replica from the same saved
// (state, stream) pair, so the sweep map is a deterministic self-map and its
// sup-norm change can genuinely contract below the Monte Carlo noise floor.
// Windows halve (down to one cell) whenever the observed sweep-to-sweep
// contraction factor reaches 0.5.  Non-convergence inside the sweep budget
// comes back flagged, never silent.  Replica streams derive from one u64
// drawn off `rng`.
TrajectorySolution solve_trajectory(const TrajectoryConfig& cfg, RngStream& rng);

struct StationaryConfig {
    DensityLaw law;
    RateSet fixed;  // kappa, kappa_tilde_or_star, h_tilde must be positive
    Geometry geom;
    double damping = 0.5;  // a in: rates <- (1-a)*rates + a*law(rho_hat)
    double tol = 0.01;
    int max_iters = 60;
    double burn_in = 50;  // Monte Carlo knobs for each density estimate
    double sample_time = 200;
    int batches = 32;
    double conf = 0.99;
    // Starting point; negative means start from law(0.5).
    double init_lambda = -1, init_h = -1;
};

struct StationaryFixedPoint {
    double lambda_star = 0, h_star = 0;
    double rho_star = 0;  // fresh independent estimate at the fixed point
    double rho_ci = 0;    // CI halfwidth of that estimate
    // max(|lambda* - Lambda(rho)|, |h* - H(rho)|) against the fresh estimate,
    // never the one used during iteration.
    double residual = 0;
    bool converged = false;
    bool law_touches_zero = false;
    bool clamped = false;
    int iters = 0;
    std::vector<std::array<double, 3>> trace;  // (lambda, h, rho_hat) per iter
};

// Damped iteration lambda <- (1-a)lambda + a*Lambda(rho_hat), likewise h,
// with rho_hat the Monte Carlo stationary density at the current rates;
// stops when the damped update and the fixed-point discrepancy both fall
// below tol.  h = 0 exactly is handled without simulation: a finite lattice
// with no spontaneous births has stationary density of 1's equal to 0.
// The final residual is re-estimated from an independent stream.
StationaryFixedPoint solve_stationary(const StationaryConfig& cfg, RngStream& rng);

// Multi-start enumeration over a grid of initial (lambda, h) pairs, for laws
// whose fixed-point equations admit several solutions.
std::vector<StationaryFixedPoint> solve_stationary_multi(
    const StationaryConfig& cfg, const std::vector<std::array<double, 2>>& starts,
    RngStream& rng);

}  // namespace contact
