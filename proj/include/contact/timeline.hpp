// Poisson graphical representation: build and replay timelines of symbols,
// with the shared-uniform coupling that lets ONE stored timeline realize the
// process at every up-rate mass q simultaneously.
//
// Construction: each site line carries a unit-rate Poisson process; every
// arrival is a symbol with three independent uniforms (Q, B, G).  For a given
// q the symbol's type is resolved as
//   up symbol   iff Q <= q;
//   down symbols split by B against kappa/(kappa + kappa_tilde_or_star)
//     (base ratio, independent of q): D1 else D2;
//   up symbols split by G against a FIXED cumulative partition of [0,1]
//     proportional to (h, h_tilde, lambda x4 directions, lambda_tilde x4
//     directions) at the base parameterization.  Re-parameterizing q rescales
//     the whole up block and leaves these ratios (and hence the partition)
//     unchanged, so the up/arrow sets are nested upward in q and the down
//     sets nested downward: replays at q_low <= q_high are pathwise ordered.
//
// Replay semantics per resolved type (target site = the symbol's site):
//   U1: 0 -> 1;   U2: -1 -> 0;   D1: 1 -> 0;
//   D2: 0 -> -1 (Model A), any state -> -1 (Model B);
//   A1 with direction d: if the neighbor in direction d is 1 and the target
//     is 0, the target becomes 1;
//   A2 with direction d (Model A only): if that neighbor is 1 and the target
//     is -1, the target becomes 0.
// All maps are monotone and the up maps dominate the identity, which is what
// every ordering test in this module leans on.
//
// Type ranks (fixed, used by indicator sets and serialization):
//   U1=0, U2=1, A1 L/R/U/D=2..5, A2 L/R/U/D=6..9, D1=10, D2=11.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "contact/lattice.hpp"
#include "contact/rng.hpp"

namespace contact {

enum class SymbolTag : std::uint8_t { U1, U2, A1, A2, D1, D2 };

struct ResolvedType {
    SymbolTag tag;
    Dir dir;  // meaningful for A1/A2 only

    int rank() const {
        switch (tag) {
            case SymbolTag::U1: return 0;
            case SymbolTag::U2: return 1;
            case SymbolTag::A1: return 2 + static_cast<int>(dir);
            case SymbolTag::A2: return 6 + static_cast<int>(dir);
            case SymbolTag::D1: return 10;
            default: return 11;
        }
    }
};
constexpr int kTypeRanks = 12;

struct Symbol {
    double time;
    double Q, B, G;  // coupling uniforms
    std::int32_t site;
};

struct GraphicalTimeline {
    Geometry geom;
    double t0 = 0, t1 = 0;
    RateSet base;  // rescaled; fixes the resolution ratios and the model
    std::uint64_t build_seed = 0;
    std::vector<Symbol> symbols;  // sorted by (time, site, insertion order)

    Model model() const { return base.model; }
};

// Resolve one symbol's type at up-mass q.  Errors (at timeline level, checked
// once in make_resolver) if the needed base block has zero mass.
class Resolver {
  public:
    Resolver(const RateSet& base, double q);
    ResolvedType operator()(const Symbol& s) const {
        if (s.Q <= q_) {
            int lo = 0, hi = 10;  // cum_[k] = upper boundary of rank k
            while (lo < hi) {
                const int mid = (lo + hi) / 2;
                if (s.G <= cum_[mid]) hi = mid; else lo = mid + 1;
            }
            return up_types_[lo];
        }
        return {s.B <= down_split_ ? SymbolTag::D1 : SymbolTag::D2, Dir::Left};
    }
    double q() const { return q_; }

  private:
    double q_;
    double down_split_;
    double cum_[10];
    ResolvedType up_types_[10];
};

// Unit-rate Poisson symbols with attached uniforms over geom x [t0, t1].
// `base` must be rescaled; the timeline is q-agnostic.
GraphicalTimeline build_coupled(const Geometry& geom, double t0, double t1,
                                const QParameterization& base, RngStream& rng);

// Refill an existing timeline (same geometry/window/base) from a new stream,
// reusing the symbol buffer.  Used by the sampling loops.
void rebuild_coupled(GraphicalTimeline& tl, RngStream& rng);

// Sites held fixed during replay (the boundary condition).  Empty mask: none.
struct PinnedBoundary {
    std::vector<std::uint8_t> mask;  // per site, 1 = pinned
    SiteState value = kPlus;
};

// Apply all symbols with time in (from, to] in order at up-mass q, starting
// from `initial` (pinned sites forced to the boundary value first).
Configuration replay(const GraphicalTimeline& tl, double q, Model model,
                     const Configuration& initial, const PinnedBoundary& boundary = {},
                     double from = -1e300, double to = 1e300);

// State at site x and time 0 under the 1-boundary at graph distance
// floor(sqrt(n)) from x and all-1 initial state at time -sqrt(n).
// floor(sqrt(n)) == 0 gives 1 identically (x itself is boundary).
// Errors if the timeline does not cover [-sqrt(n), 0] or the lattice cannot
// hold the ball plus its boundary shell.
SiteState boundary_pinned_state(const GraphicalTimeline& tl, int x, double q, int n);

// Sound under-approximation of the same state after discarding every up
// symbol whose time lies within delta of any OTHER symbol at the same site or
// a 4-neighbor site; replayed with the identical boundary.  By monotonicity
// in the up/arrow sets the result never exceeds boundary_pinned_state, with
// equality when nothing is discarded.
SiteState implied_lower_bound(const GraphicalTimeline& tl, double q, double delta,
                              int x, int n);

struct CoupleResult {
    bool ordered = true;
    int violation_site = -1;
    double violation_time = 0;
};

// Replays (q_low, xi_low) and (q_high, xi_high) from the SAME symbols and
// checks the pointwise order after every symbol application over
// [t0, t0 + horizon].  Preconditions: xi_low <= xi_high, q_low <= q_high.
CoupleResult couple_monotone(const GraphicalTimeline& tl, double q_low, double q_high,
                             Model model, const Configuration& xi_low,
                             const Configuration& xi_high, double horizon);

// 0/1 indicators: site v, interval index k >= 1, resolved type rank r has a
// symbol of that type in {v} x (-k*delta, (-k+1)*delta].  Symbols at positive
// times are outside the family and ignored.
struct IndicatorSet {
    double delta = 0;
    int k_max = 0;
    int n_sites = 0;
    std::vector<std::uint16_t> bits;  // [site * k_max + (k-1)], bit per rank

    bool get(int site, int k, int type_rank) const {
        if (k < 1 || k > k_max) return false;
        return (bits[static_cast<std::size_t>(site) * k_max + (k - 1)] >>
                type_rank) & 1u;
    }
    std::int64_t count() const {
        std::int64_t c = 0;
        for (std::uint16_t b : bits) c += __builtin_popcount(b);
        return c;
    }
};

IndicatorSet indicators(const GraphicalTimeline& tl, double q, double delta);

// Flat binary serialization with a self-describing header (geometry, window,
// base rates, build seed).  Record layout per symbol: site_x, site_y (int32),
// time, Q, B, G (f64).
void save_timeline(const GraphicalTimeline& tl, std::ostream& out);
GraphicalTimeline load_timeline(std::istream& in);

}  // namespace contact
