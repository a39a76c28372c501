// Geometry, state storage, neighbor enumeration, and rate-parameter bundles
// shared by every other module.
//
// Conventions fixed here and relied on everywhere:
//   - site states are {-1, 0, 1} with the total order -1 < 0 < 1;
//   - sites are indexed row-major, x = col, y = row, index = y*width + x;
//   - every site has exactly 4 directed incoming neighbor slots (L, R, U, D);
//     on a torus of width 2 the left and right neighbors coincide as a site
//     but still count as two slots (same for height 2), so neighbor-dependent
//     rates are slot-counted;
//   - "up" is y-1, "down" is y+1 (wrapping on the torus).
#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace contact {

using SiteState = std::int8_t;  // one of {-1, 0, 1}

constexpr SiteState kMinus = -1;
constexpr SiteState kZero = 0;
constexpr SiteState kPlus = 1;

inline bool valid_state(SiteState s) { return s == kMinus || s == kZero || s == kPlus; }

enum class GeomKind { Torus, Rectangle };

enum class Dir : std::uint8_t { Left = 0, Right = 1, Up = 2, Down = 3 };
constexpr int kDirCount = 4;

struct Geometry {
    GeomKind kind = GeomKind::Torus;
    int width = 0;
    int height = 0;
    // Rectangle only: the state every exterior site is held at.
    SiteState boundary_state = kPlus;

    int sites() const { return width * height; }
    int index(int x, int y) const { return y * width + x; }
    int x_of(int site) const { return site % width; }
    int y_of(int site) const { return site / width; }
    bool in_bounds(int site) const { return site >= 0 && site < sites(); }

    void validate() const {
        if (width < 1 || height < 1) throw std::invalid_argument("geometry: empty lattice");
        if (kind == GeomKind::Torus && (width < 2 || height < 2))
            throw std::invalid_argument("geometry: torus needs width >= 2 and height >= 2");
        if (!valid_state(boundary_state))
            throw std::invalid_argument("geometry: bad boundary state");
    }

    bool operator==(const Geometry& o) const {
        return kind == o.kind && width == o.width && height == o.height &&
               (kind == GeomKind::Torus || boundary_state == o.boundary_state);
    }
};

// One directed incoming neighbor slot.  `site` is the source lattice site, or
// -1 with exterior=true when the slot points outside a rectangle (the caller
// resolves it to geometry.boundary_state).
struct Neighbor {
    Dir dir;
    int site;
    bool exterior;
};

// The 4 incoming slots of `site`, in direction order L, R, U, D.
// Throws if `site` is out of bounds.
std::array<Neighbor, 4> neighbors(const Geometry& g, int site);

struct Configuration {
    Geometry geom;
    std::vector<SiteState> states;  // row-major, length width*height

    static Configuration filled(const Geometry& g, SiteState s) {
        Configuration c;
        c.geom = g;
        c.states.assign(static_cast<std::size_t>(g.sites()), s);
        return c;
    }

    SiteState at(int site) const { return states[static_cast<std::size_t>(site)]; }
    SiteState& at(int site) { return states[static_cast<std::size_t>(site)]; }

    // State seen through a neighbor slot; exterior slots read the boundary.
    SiteState resolve(const Neighbor& n) const {
        return n.exterior ? geom.boundary_state : at(n.site);
    }

    // Slot-counted number of neighbors of `site` in state 1.
    int ones_in_neighborhood(int site) const {
        int n1 = 0;
        for (const Neighbor& n : neighbors(geom, site))
            if (resolve(n) == kPlus) ++n1;
        return n1;
    }

    int count(SiteState s) const {
        int c = 0;
        for (SiteState v : states) c += (v == s);
        return c;
    }
    double density_of_ones() const {
        return states.empty() ? 0.0 : static_cast<double>(count(kPlus)) / states.size();
    }
};

// Pointwise partial order on configurations over the same geometry.
bool leq(const Configuration& a, const Configuration& b);

enum class Model { A, B };

// Constant-rate parameter bundle.
//   Model A: kappa (1->0), kappa_tilde_or_star = kappa_tilde (0->-1),
//            lambda per 1-neighbor slot (0->1), lambda_tilde per 1-neighbor
//            slot (-1->0), h (0->1), h_tilde (-1->0).
//   Model B: kappa (1->0), kappa_tilde_or_star = kappa_star (0 or 1 -> -1),
//            lambda per 1-neighbor slot (0->1), h (0->1), h_tilde (-1->0);
//            lambda_tilde is identically 0.
struct RateSet {
    Model model = Model::A;
    double kappa = 0;
    double kappa_tilde_or_star = 0;
    double lambda = 0;
    double lambda_tilde = 0;
    double h = 0;
    double h_tilde = 0;

    // Total per-line event rate: kappa + kappa~ + 4*lambda + 4*lambda~ + h + h~
    // (Model B: lambda_tilde term is 0).
    double total() const {
        return kappa + kappa_tilde_or_star + 4 * lambda + 4 * lambda_tilde + h + h_tilde;
    }
    // Aggregate "up" mass: 4*lambda + 4*lambda_tilde + h + h_tilde.
    double up_mass() const { return 4 * lambda + 4 * lambda_tilde + h + h_tilde; }
    double down_mass() const { return kappa + kappa_tilde_or_star; }

    void validate() const {
        if (kappa < 0 || kappa_tilde_or_star < 0 || lambda < 0 || lambda_tilde < 0 ||
            h < 0 || h_tilde < 0)
            throw std::invalid_argument("rates: negative rate");
        if (model == Model::B && lambda_tilde != 0)
            throw std::invalid_argument("rates: model B has lambda_tilde = 0 identically");
    }

    bool is_rescaled(double tol = 1e-9) const {
        return std::abs(total() - 1.0) <= tol;
    }

    // Scale all rates so the per-line total is 1.  Errors on total 0.
    RateSet rescaled() const;
};

// A rescaled base together with the aggregate up-rate mass q.  Varying q
// preserves the ratios inside the up block and inside the down block and
// keeps the per-line total at 1.
struct QParameterization {
    RateSet base;  // rescaled
    double q = 0;  // equals base.up_mass()

    static QParameterization from_base(const RateSet& base_rescaled);
};

// Re-parameterize `base` (rescaled) to up-mass q, preserving internal ratios.
// Errors: q outside [0,1]; q > 0 with zero up block; q < 1 with zero down
// block (ratios undefined in both degenerate cases).
RateSet with_q(const RateSet& base, double q);

}  // namespace contact
