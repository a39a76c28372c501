#include "contact/lattice.hpp"

namespace contact {

std::array<Neighbor, 4> neighbors(const Geometry& g, int site) {
    if (!g.in_bounds(site)) throw std::out_of_range("neighbors: site out of bounds");
    const int x = g.x_of(site);
    const int y = g.y_of(site);
    const int w = g.width;
    const int h = g.height;

    std::array<Neighbor, 4> out;
    if (g.kind == GeomKind::Torus) {
        out[0] = {Dir::Left, g.index((x + w - 1) % w, y), false};
        out[1] = {Dir::Right, g.index((x + 1) % w, y), false};
        out[2] = {Dir::Up, g.index(x, (y + h - 1) % h), false};
        out[3] = {Dir::Down, g.index(x, (y + 1) % h), false};
    } else {
        auto slot = [&](Dir d, int nx, int ny) -> Neighbor {
            if (nx < 0 || nx >= w || ny < 0 || ny >= h) return {d, -1, true};
            return {d, g.index(nx, ny), false};
        };
        out[0] = slot(Dir::Left, x - 1, y);
        out[1] = slot(Dir::Right, x + 1, y);
        out[2] = slot(Dir::Up, x, y - 1);
        out[3] = slot(Dir::Down, x, y + 1);
    }
    return out;
}

bool leq(const Configuration& a, const Configuration& b) {
    if (!(a.geom == b.geom) || a.states.size() != b.states.size())
        throw std::invalid_argument("leq: configurations on different geometries");
    for (std::size_t i = 0; i < a.states.size(); ++i)
        if (a.states[i] > b.states[i]) return false;
    return true;
}

RateSet RateSet::rescaled() const {
    validate();
    const double t = total();
    if (t <= 0) throw std::invalid_argument("rescaled: total rate is zero");
    RateSet r = *this;
    r.kappa /= t;
    r.kappa_tilde_or_star /= t;
    r.lambda /= t;
    r.lambda_tilde /= t;
    r.h /= t;
    r.h_tilde /= t;
    return r;
}

QParameterization QParameterization::from_base(const RateSet& base_rescaled) {
    if (!base_rescaled.is_rescaled())
        throw std::invalid_argument("q-parameterization: base must be rescaled");
    return {base_rescaled, base_rescaled.up_mass()};
}

RateSet with_q(const RateSet& base, double q) {
    base.validate();
    if (!base.is_rescaled())
        throw std::invalid_argument("with_q: base must be rescaled");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("with_q: q outside [0,1]");

    const double u = base.up_mass();
    const double d = base.down_mass();
    if (q > 0.0 && u <= 0.0)
        throw std::invalid_argument("with_q: up-block ratios undefined (base up block zero)");
    if (q < 1.0 && d <= 0.0)
        throw std::invalid_argument("with_q: down-block ratios undefined (base down block zero)");

    RateSet r = base;
    const double fu = (u > 0.0) ? q / u : 0.0;
    const double fd = (d > 0.0) ? (1.0 - q) / d : 0.0;
    r.lambda *= fu;
    r.lambda_tilde *= fu;
    r.h *= fu;
    r.h_tilde *= fu;
    r.kappa *= fd;
    r.kappa_tilde_or_star *= fd;
    return r;
}

}  // namespace contact
