#include "contact/timeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace contact {

Resolver::Resolver(const RateSet& base, double q) : q_(q) {
    base.validate();
    if (!base.is_rescaled())
        throw std::invalid_argument("resolver: base must be rescaled");
    if (!(q >= 0 && q <= 1)) throw std::invalid_argument("resolver: q outside [0,1]");

    const double u = base.up_mass();
    const double d = base.down_mass();
    if (q > 0 && u <= 0)
        throw std::invalid_argument("resolver: up types undefined (base up block zero)");
    if (q < 1 && d <= 0)
        throw std::invalid_argument("resolver: down split undefined (base down block zero)");

    down_split_ = (d > 0) ? base.kappa / d : 0.0;

    // Fixed partition of [0,1] for G, proportional to the base up rates:
    // U1 (h), U2 (h_tilde), A1 per direction (lambda), A2 per direction
    // (lambda_tilde).  Zero-mass types get empty subintervals.
    double w[10];
    w[0] = base.h;
    w[1] = base.h_tilde;
    for (int i = 0; i < 4; ++i) w[2 + i] = base.lambda;
    for (int i = 0; i < 4; ++i) w[6 + i] = base.lambda_tilde;
    up_types_[0] = {SymbolTag::U1, Dir::Left};
    up_types_[1] = {SymbolTag::U2, Dir::Left};
    for (int i = 0; i < 4; ++i) up_types_[2 + i] = {SymbolTag::A1, static_cast<Dir>(i)};
    for (int i = 0; i < 4; ++i) up_types_[6 + i] = {SymbolTag::A2, static_cast<Dir>(i)};

    double cum = 0;
    const double total = (u > 0) ? u : 1.0;
    for (int i = 0; i < 10; ++i) {
        cum += w[i] / total;
        cum_[i] = cum;
    }
    cum_[9] = 1.0 + 1e-15;  // G in (last boundary, 1] maps to the final type
}

GraphicalTimeline build_coupled(const Geometry& geom, double t0, double t1,
                                const QParameterization& base, RngStream& rng) {
    geom.validate();
    if (!(t1 >= t0)) throw std::invalid_argument("build_coupled: empty time window");
    if (!base.base.is_rescaled())
        throw std::invalid_argument("build_coupled: base must be rescaled");

    GraphicalTimeline tl;
    tl.geom = geom;
    tl.t0 = t0;
    tl.t1 = t1;
    tl.base = base.base;
    rebuild_coupled(tl, rng);
    return tl;
}

void rebuild_coupled(GraphicalTimeline& tl, RngStream& rng) {
    tl.symbols.clear();
    const int n = tl.geom.sites();
    const double len = tl.t1 - tl.t0;
    tl.symbols.reserve(static_cast<std::size_t>(
        static_cast<double>(n) * len * 1.05 + 64));
    // Unit-rate arrivals per site line, in site order; sorted globally after.
    for (int site = 0; site < n; ++site) {
        double t = tl.t0;
        for (;;) {
            t += rng.exponential(1.0);
            if (t > tl.t1) break;
            Symbol s;
            s.time = t;
            s.site = site;
            s.Q = rng.uniform();
            s.B = rng.uniform();
            s.G = rng.uniform();
            tl.symbols.push_back(s);
        }
    }
    // In-place sort on (time, site); exact ties beyond that have probability
    // zero and any resolution couples correctly (the uniforms are i.i.d.).
    std::sort(tl.symbols.begin(), tl.symbols.end(),
              [](const Symbol& a, const Symbol& b) {
                  if (a.time != b.time) return a.time < b.time;
                  return a.site < b.site;
              });
}

namespace {

// Applies one resolved symbol to `state`; returns the (single) site whose
// value may have changed, or -1 if the target was pinned.
inline int apply_symbol(const GraphicalTimeline& tl, const Symbol& s, ResolvedType rt,
                        Model model, Configuration& state,
                        const std::vector<std::uint8_t>* pinned) {
    const int v = s.site;
    if (pinned && (*pinned)[static_cast<std::size_t>(v)]) return -1;
    SiteState& x = state.at(v);
    switch (rt.tag) {
        case SymbolTag::U1:
            if (x == kZero) x = kPlus;
            break;
        case SymbolTag::U2:
            if (x == kMinus) x = kZero;
            break;
        case SymbolTag::D1:
            if (x == kPlus) x = kZero;
            break;
        case SymbolTag::D2:
            if (model == Model::B) {
                x = kMinus;
            } else if (x == kZero) {
                x = kMinus;
            }
            break;
        case SymbolTag::A1:
        case SymbolTag::A2: {
            const Neighbor nb = neighbors(tl.geom, v)[static_cast<int>(rt.dir)];
            const SiteState src = state.resolve(nb);
            if (src == kPlus) {
                if (rt.tag == SymbolTag::A1) {
                    if (x == kZero) x = kPlus;
                } else {
                    if (x == kMinus) x = kZero;
                }
            }
            break;
        }
    }
    return v;
}

}  // namespace

Configuration replay(const GraphicalTimeline& tl, double q, Model model,
                     const Configuration& initial, const PinnedBoundary& boundary,
                     double from, double to) {
    if (!(initial.geom == tl.geom))
        throw std::invalid_argument("replay: initial state on a different geometry");
    if (model != tl.model())
        throw std::invalid_argument("replay: model does not match the timeline base");

    const Resolver resolve(tl.base, q);
    Configuration state = initial;
    const std::vector<std::uint8_t>* pinned = nullptr;
    if (!boundary.mask.empty()) {
        if (boundary.mask.size() != state.states.size())
            throw std::invalid_argument("replay: boundary mask size mismatch");
        for (std::size_t i = 0; i < boundary.mask.size(); ++i)
            if (boundary.mask[i]) state.states[i] = boundary.value;
        pinned = &boundary.mask;
    }
    for (const Symbol& s : tl.symbols) {
        if (s.time <= from) continue;
        if (s.time > to) break;
        if (!tl.geom.in_bounds(s.site))
            throw std::out_of_range("replay: symbol outside region");
        apply_symbol(tl, s, resolve(s), model, state, pinned);
    }
    return state;
}

namespace {

int torus_l1(const Geometry& g, int a, int b) {
    int dx = std::abs(g.x_of(a) - g.x_of(b));
    int dy = std::abs(g.y_of(a) - g.y_of(b));
    if (g.kind == GeomKind::Torus) {
        dx = std::min(dx, g.width - dx);
        dy = std::min(dy, g.height - dy);
    }
    return dx + dy;
}

// Boundary mask for the eta construction: sites at distance >= r from x.
PinnedBoundary eta_boundary(const GraphicalTimeline& tl, int x, int n, int& r_out,
                            double& start_out) {
    if (!tl.geom.in_bounds(x))
        throw std::out_of_range("boundary state: site outside region");
    if (n < 0) throw std::invalid_argument("boundary state: negative n");
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    const int r = static_cast<int>(std::floor(sqrt_n));
    r_out = r;
    start_out = -sqrt_n;
    if (tl.t0 > -sqrt_n || tl.t1 < 0)
        throw std::invalid_argument(
            "boundary state: timeline does not cover [-sqrt(n), 0]");
    if (tl.geom.kind == GeomKind::Torus &&
        2 * r + 1 > std::min(tl.geom.width, tl.geom.height))
        throw std::invalid_argument(
            "boundary state: lattice cannot hold the radius ball and its shell");
    if (tl.geom.kind == GeomKind::Rectangle && tl.geom.boundary_state != kPlus)
        throw std::invalid_argument(
            "boundary state: rectangle exterior must be the 1-state");
    PinnedBoundary b;
    b.value = kPlus;
    b.mask.assign(static_cast<std::size_t>(tl.geom.sites()), 0);
    for (int s = 0; s < tl.geom.sites(); ++s)
        if (torus_l1(tl.geom, x, s) >= r) b.mask[static_cast<std::size_t>(s)] = 1;
    return b;
}

}  // namespace

SiteState boundary_pinned_state(const GraphicalTimeline& tl, int x, double q, int n) {
    int r = 0;
    double start = 0;
    const PinnedBoundary b = eta_boundary(tl, x, n, r, start);
    if (r == 0) return kPlus;  // x itself is boundary
    const Configuration all1 = Configuration::filled(tl.geom, kPlus);
    return replay(tl, q, tl.model(), all1, b, start, 0.0).at(x);
}

SiteState implied_lower_bound(const GraphicalTimeline& tl, double q, double delta,
                              int x, int n) {
    if (delta <= 0) throw std::invalid_argument("implied_lower_bound: delta <= 0");
    int r = 0;
    double start = 0;
    const PinnedBoundary b = eta_boundary(tl, x, n, r, start);
    if (r == 0) return kPlus;

    // Per-site time lists over the whole timeline (sorted; symbols are).
    const int nsites = tl.geom.sites();
    std::vector<std::vector<double>> times(static_cast<std::size_t>(nsites));
    for (const Symbol& s : tl.symbols)
        times[static_cast<std::size_t>(s.site)].push_back(s.time);

    const Resolver resolve(tl.base, q);
    auto crowded = [&](int site, double t, bool exclude_self_instant) {
        const auto check = [&](int u, bool self) {
            const auto& v = times[static_cast<std::size_t>(u)];
            auto lo = std::lower_bound(v.begin(), v.end(), t - delta);
            for (; lo != v.end() && *lo <= t + delta; ++lo) {
                if (self && *lo == t) continue;  // the symbol itself
                return true;
            }
            return false;
        };
        if (check(site, exclude_self_instant)) return true;
        for (const Neighbor& nb : neighbors(tl.geom, site))
            if (!nb.exterior && nb.site != site && check(nb.site, false)) return true;
        return false;
    };

    // Filtered copy: up symbols in crowded neighborhoods removed.  Dropping
    // up symbols only ever lowers the replayed state (their maps dominate the
    // identity and all maps are monotone), so the result is a sound lower
    // bound for the unfiltered replay.
    GraphicalTimeline filtered;
    filtered.geom = tl.geom;
    filtered.t0 = tl.t0;
    filtered.t1 = tl.t1;
    filtered.base = tl.base;
    filtered.build_seed = tl.build_seed;
    filtered.symbols.reserve(tl.symbols.size());
    for (const Symbol& s : tl.symbols) {
        const ResolvedType rt = resolve(s);
        const bool up = rt.tag == SymbolTag::U1 || rt.tag == SymbolTag::U2 ||
                        rt.tag == SymbolTag::A1 || rt.tag == SymbolTag::A2;
        if (up && crowded(s.site, s.time, true)) continue;
        filtered.symbols.push_back(s);
    }

    const Configuration all1 = Configuration::filled(tl.geom, kPlus);
    return replay(filtered, q, tl.model(), all1, b, start, 0.0).at(x);
}

CoupleResult couple_monotone(const GraphicalTimeline& tl, double q_low, double q_high,
                             Model model, const Configuration& xi_low,
                             const Configuration& xi_high, double horizon) {
    if (q_low > q_high) throw std::invalid_argument("couple_monotone: q_low > q_high");
    if (!leq(xi_low, xi_high))
        throw std::invalid_argument("couple_monotone: initial states not ordered");
    if (!(xi_low.geom == tl.geom))
        throw std::invalid_argument("couple_monotone: geometry mismatch");
    if (model != tl.model())
        throw std::invalid_argument("couple_monotone: model mismatch");

    const Resolver res_low(tl.base, q_low);
    const Resolver res_high(tl.base, q_high);
    Configuration lo = xi_low, hi = xi_high;
    const double t_end = tl.t0 + horizon;

    CoupleResult out;
    for (const Symbol& s : tl.symbols) {
        if (s.time > t_end) break;
        apply_symbol(tl, s, res_low(s), model, lo, nullptr);
        apply_symbol(tl, s, res_high(s), model, hi, nullptr);
        // Only the touched site can newly violate the order.
        if (lo.at(s.site) > hi.at(s.site)) {
            out.ordered = false;
            out.violation_site = s.site;
            out.violation_time = s.time;
            return out;
        }
    }
    return out;
}

IndicatorSet indicators(const GraphicalTimeline& tl, double q, double delta) {
    if (delta <= 0) throw std::invalid_argument("indicators: delta <= 0");
    const Resolver resolve(tl.base, q);

    IndicatorSet set;
    set.delta = delta;
    set.n_sites = tl.geom.sites();
    set.k_max = std::max(0, static_cast<int>(std::floor(-tl.t0 / delta)) + 1);
    set.bits.assign(static_cast<std::size_t>(set.n_sites) * set.k_max, 0);
    for (const Symbol& s : tl.symbols) {
        if (s.time > 0) continue;  // intervals hang below time 0
        const int k = static_cast<int>(std::floor(-s.time / delta)) + 1;
        if (k < 1 || k > set.k_max) continue;
        set.bits[static_cast<std::size_t>(s.site) * set.k_max + (k - 1)] |=
            static_cast<std::uint16_t>(1u << resolve(s).rank());
    }
    return set;
}

namespace {

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

constexpr std::uint32_t kMagic = 0x434C544Eu;  // "NTLC" little-endian
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_timeline(const GraphicalTimeline& tl, std::ostream& out) {
    put(out, kMagic);
    put(out, kVersion);
    put(out, static_cast<std::uint8_t>(tl.geom.kind == GeomKind::Torus ? 0 : 1));
    put(out, static_cast<std::int32_t>(tl.geom.width));
    put(out, static_cast<std::int32_t>(tl.geom.height));
    put(out, static_cast<std::int8_t>(tl.geom.boundary_state));
    put(out, static_cast<std::uint8_t>(tl.base.model == Model::A ? 0 : 1));
    put(out, tl.base.kappa);
    put(out, tl.base.kappa_tilde_or_star);
    put(out, tl.base.lambda);
    put(out, tl.base.lambda_tilde);
    put(out, tl.base.h);
    put(out, tl.base.h_tilde);
    put(out, tl.t0);
    put(out, tl.t1);
    put(out, tl.build_seed);
    put(out, static_cast<std::uint64_t>(tl.symbols.size()));
    for (const Symbol& s : tl.symbols) {
        put(out, static_cast<std::int32_t>(tl.geom.x_of(s.site)));
        put(out, static_cast<std::int32_t>(tl.geom.y_of(s.site)));
        put(out, s.time);
        put(out, s.Q);
        put(out, s.B);
        put(out, s.G);
    }
}

GraphicalTimeline load_timeline(std::istream& in) {
    if (get<std::uint32_t>(in) != kMagic)
        throw std::runtime_error("load_timeline: bad magic");
    if (get<std::uint32_t>(in) != kVersion)
        throw std::runtime_error("load_timeline: unsupported version");
    GraphicalTimeline tl;
    tl.geom.kind = get<std::uint8_t>(in) == 0 ? GeomKind::Torus : GeomKind::Rectangle;
    tl.geom.width = get<std::int32_t>(in);
    tl.geom.height = get<std::int32_t>(in);
    tl.geom.boundary_state = static_cast<SiteState>(get<std::int8_t>(in));
    tl.base.model = get<std::uint8_t>(in) == 0 ? Model::A : Model::B;
    tl.base.kappa = get<double>(in);
    tl.base.kappa_tilde_or_star = get<double>(in);
    tl.base.lambda = get<double>(in);
    tl.base.lambda_tilde = get<double>(in);
    tl.base.h = get<double>(in);
    tl.base.h_tilde = get<double>(in);
    tl.t0 = get<double>(in);
    tl.t1 = get<double>(in);
    tl.build_seed = get<std::uint64_t>(in);
    const auto count = get<std::uint64_t>(in);
    if (!in) throw std::runtime_error("load_timeline: truncated header");
    tl.geom.validate();
    tl.symbols.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const int x = get<std::int32_t>(in);
        const int y = get<std::int32_t>(in);
        Symbol s;
        s.time = get<double>(in);
        s.Q = get<double>(in);
        s.B = get<double>(in);
        s.G = get<double>(in);
        if (x < 0 || x >= tl.geom.width || y < 0 || y >= tl.geom.height)
            throw std::runtime_error("load_timeline: symbol outside region");
        s.site = tl.geom.index(x, y);
        tl.symbols.push_back(s);
    }
    if (!in) throw std::runtime_error("load_timeline: truncated records");
    return tl;
}

}  // namespace contact
