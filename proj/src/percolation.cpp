#include "contact/percolation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "contact/engine.hpp"
#include "contact/stats.hpp"

namespace contact {

namespace {

// Union-find over sites carrying the displacement to the parent in universal
// cover coordinates; a union closing a cycle with nonzero displacement is a
// torus wrap along the offending axis.
struct WrapUnionFind {
    std::vector<int> parent, rnk;
    std::vector<int> ox, oy;            // offset to parent
    std::vector<std::uint8_t> wx, wy;   // per root: wrap seen

    explicit WrapUnionFind(int n)
        : parent(static_cast<std::size_t>(n)),
          rnk(static_cast<std::size_t>(n), 0),
          ox(static_cast<std::size_t>(n), 0),
          oy(static_cast<std::size_t>(n), 0),
          wx(static_cast<std::size_t>(n), 0),
          wy(static_cast<std::size_t>(n), 0) {
        std::iota(parent.begin(), parent.end(), 0);
    }

    // Root of v; ax/ay come back as pos(v) - pos(root).  Path-compresses.
    int find(int v, int& ax, int& ay) {
        int root = v;
        ax = 0;
        ay = 0;
        while (parent[static_cast<std::size_t>(root)] != root) {
            ax += ox[static_cast<std::size_t>(root)];
            ay += oy[static_cast<std::size_t>(root)];
            root = parent[static_cast<std::size_t>(root)];
        }
        int cur = v, cx = 0, cy = 0;
        while (parent[static_cast<std::size_t>(cur)] != root) {
            const int nxt = parent[static_cast<std::size_t>(cur)];
            const int sx = ox[static_cast<std::size_t>(cur)];
            const int sy = oy[static_cast<std::size_t>(cur)];
            parent[static_cast<std::size_t>(cur)] = root;
            ox[static_cast<std::size_t>(cur)] = ax - cx;
            oy[static_cast<std::size_t>(cur)] = ay - cy;
            cx += sx;
            cy += sy;
            cur = nxt;
        }
        return root;
    }

    // Join along an edge with pos(v) = pos(u) + (ex, ey).
    void unite(int u, int v, int ex, int ey) {
        int aux, auy, avx, avy;
        const int ru = find(u, aux, auy);
        const int rv = find(v, avx, avy);
        if (ru == rv) {
            // Cycle: a consistent embedding needs the displacements to agree;
            // any residue is a multiple of the lattice period.
            if (aux + ex - avx != 0) wx[static_cast<std::size_t>(ru)] = 1;
            if (auy + ey - avy != 0) wy[static_cast<std::size_t>(ru)] = 1;
            return;
        }
        int big = ru, small = rv;
        // off[small] = pos(small_root) - pos(big_root)
        int offx = aux + ex - avx;  // valid when big = ru, small = rv
        int offy = auy + ey - avy;
        if (rnk[static_cast<std::size_t>(ru)] < rnk[static_cast<std::size_t>(rv)]) {
            big = rv;
            small = ru;
            offx = -offx;
            offy = -offy;
        } else if (rnk[static_cast<std::size_t>(ru)] ==
                   rnk[static_cast<std::size_t>(rv)]) {
            ++rnk[static_cast<std::size_t>(ru)];
        }
        parent[static_cast<std::size_t>(small)] = big;
        ox[static_cast<std::size_t>(small)] = offx;
        oy[static_cast<std::size_t>(small)] = offy;
        wx[static_cast<std::size_t>(big)] |= wx[static_cast<std::size_t>(small)];
        wy[static_cast<std::size_t>(big)] |= wy[static_cast<std::size_t>(small)];
    }
};

}  // namespace

ClusterReport label_clusters(const Configuration& config) {
    config.geom.validate();
    const int N = config.geom.sites();
    if (static_cast<int>(config.states.size()) != N)
        throw std::invalid_argument("label_clusters: malformed configuration");
    const int W = config.geom.width, H = config.geom.height;
    const bool torus = config.geom.kind == GeomKind::Torus;

    WrapUnionFind uf(N);
    for (int s = 0; s < N; ++s) {
        if (config.at(s) != kPlus) continue;
        const int x = config.geom.x_of(s), y = config.geom.y_of(s);
        if (torus || x + 1 < W) {
            const int v = config.geom.index(torus ? (x + 1) % W : x + 1, y);
            if (config.at(v) == kPlus) uf.unite(s, v, 1, 0);
        }
        if (torus || y + 1 < H) {
            const int v = config.geom.index(x, torus ? (y + 1) % H : y + 1);
            if (config.at(v) == kPlus) uf.unite(s, v, 0, 1);
        }
    }

    ClusterReport rep;
    rep.n_sites = N;
    rep.labels.assign(static_cast<std::size_t>(N), -1);
    std::vector<std::int32_t> id_of_root(static_cast<std::size_t>(N), -1);
    for (int s = 0; s < N; ++s) {
        if (config.at(s) != kPlus) continue;
        int ax, ay;
        const int root = uf.find(s, ax, ay);
        std::int32_t& id = id_of_root[static_cast<std::size_t>(root)];
        if (id < 0) {
            id = static_cast<std::int32_t>(rep.sizes.size());
            rep.sizes.push_back(0);
            rep.wraps_x.push_back(uf.wx[static_cast<std::size_t>(root)]);
            rep.wraps_y.push_back(uf.wy[static_cast<std::size_t>(root)]);
        }
        rep.labels[static_cast<std::size_t>(s)] = id;
        ++rep.sizes[static_cast<std::size_t>(id)];
    }
    for (int c = 0; c < rep.cluster_count(); ++c)
        if (rep.cluster_wraps(c)) rep.any_wrap = true;
    if (rep.labels[0] >= 0) {
        rep.origin_size = rep.sizes[static_cast<std::size_t>(rep.labels[0])];
        rep.origin_wraps = rep.cluster_wraps(rep.labels[0]);
    }
    return rep;
}

bool crossing(const Configuration& config, const CrossWindow& rect,
              CrossDir direction) {
    const Geometry& g = config.geom;
    g.validate();
    if (rect.m < 0 || rect.n < 0)
        throw std::invalid_argument("crossing: negative window extent");
    const int wext = rect.m + 1, hext = rect.n + 1;
    if (g.kind == GeomKind::Torus) {
        if (wext > g.width || hext > g.height)
            throw std::invalid_argument("crossing: window extent exceeds the lattice");
    } else {
        if (rect.x0 < 0 || rect.y0 < 0 || rect.x0 + rect.m >= g.width ||
            rect.y0 + rect.n >= g.height)
            throw std::invalid_argument("crossing: window outside the rectangle");
    }

    const auto modw = [](int a, int m) {
        const int r = a % m;
        return r < 0 ? r + m : r;
    };
    const auto occupied = [&](int i, int j) {
        const int x = g.kind == GeomKind::Torus ? modw(rect.x0 + i, g.width)
                                                : rect.x0 + i;
        const int y = g.kind == GeomKind::Torus ? modw(rect.y0 + j, g.height)
                                                : rect.y0 + j;
        return config.at(g.index(x, y)) == kPlus;
    };

    const bool horiz = direction == CrossDir::Horizontal;
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(wext) * hext, 0);
    std::vector<int> stack;
    const auto push = [&](int i, int j) {
        const std::size_t k = static_cast<std::size_t>(j) * wext + i;
        if (seen[k] || !occupied(i, j)) return;
        seen[k] = 1;
        stack.push_back(static_cast<int>(k));
    };
    if (horiz) {
        for (int j = 0; j < hext; ++j) push(0, j);
    } else {
        for (int i = 0; i < wext; ++i) push(i, 0);
    }
    while (!stack.empty()) {
        const int k = stack.back();
        stack.pop_back();
        const int i = k % wext, j = k / wext;
        if (horiz ? i == rect.m : j == rect.n) return true;
        if (i > 0) push(i - 1, j);
        if (i + 1 < wext) push(i + 1, j);
        if (j > 0) push(i, j - 1);
        if (j + 1 < hext) push(i, j + 1);
    }
    return false;
}

TailEstimate tail_estimate(const std::vector<ClusterReport>& samples,
                           const std::vector<std::int64_t>& n_grid, bool all_origins,
                           double conf) {
    if (samples.size() < 100)
        throw std::invalid_argument("tail_estimate: fewer than 100 samples");
    if (n_grid.empty()) throw std::invalid_argument("tail_estimate: empty grid");
    for (std::size_t i = 0; i < n_grid.size(); ++i)
        if (n_grid[i] < 1 || (i > 0 && n_grid[i] <= n_grid[i - 1]))
            throw std::invalid_argument(
                "tail_estimate: grid must be strictly increasing and >= 1");

    TailEstimate est;
    est.n_grid = n_grid;
    const int G = static_cast<int>(n_grid.size());
    est.p_hat.assign(static_cast<std::size_t>(G), 0.0);
    est.ci_lo.assign(static_cast<std::size_t>(G), 0.0);
    est.ci_hi.assign(static_cast<std::size_t>(G), 1.0);

    if (!all_origins) {
        std::vector<std::int64_t> sizes;
        sizes.reserve(samples.size());
        for (const ClusterReport& r : samples) {
            if (r.origin_wraps)
                ++est.censored;
            else
                sizes.push_back(r.origin_size);
        }
        est.samples = static_cast<std::int64_t>(sizes.size());
        if (est.samples > 0) {
            for (int g = 0; g < G; ++g) {
                std::int64_t hits = 0;
                for (std::int64_t s : sizes) hits += (s >= n_grid[g]);
                est.p_hat[static_cast<std::size_t>(g)] =
                    static_cast<double>(hits) / static_cast<double>(est.samples);
                const auto ci = stats::wilson(hits, est.samples, conf);
                est.ci_lo[static_cast<std::size_t>(g)] = ci.lo;
                est.ci_hi[static_cast<std::size_t>(g)] = ci.hi;
            }
        }
    } else {
        // Per-sample fraction of sites whose (non-wrapping) cluster reaches
        // size n; sites inside wrapping clusters leave both sides of the
        // fraction.
        std::vector<std::vector<double>> vals(static_cast<std::size_t>(G));
        for (const ClusterReport& r : samples) {
            std::int64_t total = r.n_sites;
            std::vector<std::int64_t> free_sizes;
            for (int c = 0; c < r.cluster_count(); ++c) {
                if (r.cluster_wraps(c))
                    total -= r.sizes[static_cast<std::size_t>(c)];
                else
                    free_sizes.push_back(r.sizes[static_cast<std::size_t>(c)]);
            }
            if (total <= 0) {
                ++est.censored;
                continue;
            }
            std::sort(free_sizes.begin(), free_sizes.end());
            std::vector<std::int64_t> suffix(free_sizes.size() + 1, 0);
            for (std::size_t i = free_sizes.size(); i-- > 0;)
                suffix[i] = suffix[i + 1] + free_sizes[i];
            for (int g = 0; g < G; ++g) {
                const auto it = std::lower_bound(free_sizes.begin(), free_sizes.end(),
                                                 n_grid[g]);
                const std::int64_t mass =
                    suffix[static_cast<std::size_t>(it - free_sizes.begin())];
                vals[static_cast<std::size_t>(g)].push_back(
                    static_cast<double>(mass) / static_cast<double>(total));
            }
        }
        est.samples = vals.empty() || vals[0].empty()
                          ? 0
                          : static_cast<std::int64_t>(vals[0].size());
        for (int g = 0; g < G && est.samples > 0; ++g) {
            const auto& v = vals[static_cast<std::size_t>(g)];
            double sum = 0;
            for (double x : v) sum += x;
            est.p_hat[static_cast<std::size_t>(g)] = sum / static_cast<double>(v.size());
            const auto ci = stats::mean_interval(v, conf);
            est.ci_lo[static_cast<std::size_t>(g)] = ci.lo;
            est.ci_hi[static_cast<std::size_t>(g)] = ci.hi;
        }
    }

    if (est.samples < 10) {
        est.classification = TailClass::Inconclusive;
        return est;
    }
    const double lo_cut = 10.0 / static_cast<double>(est.samples);
    std::vector<double> fx, fy, fw;
    bool below_resolution = false;
    for (int g = 0; g < G; ++g) {
        const double p = est.p_hat[static_cast<std::size_t>(g)];
        if (p < lo_cut) {
            below_resolution = true;
        } else if (p <= 0.5) {
            fx.push_back(static_cast<double>(n_grid[g]));
            fy.push_back(std::log(p));
            fw.push_back(p / (1.0 - p));  // inverse variance of log p-hat
        }
    }
    est.fit_points = static_cast<int>(fx.size());
    if (est.fit_points < 3) {
        if (below_resolution) {
            est.classification = TailClass::Exponential;
            est.degenerate = true;
        } else {
            est.classification = TailClass::Inconclusive;
        }
        return est;
    }

    const auto fit = stats::weighted_linfit(fx, fy, fw);
    est.rate = -fit.slope;
    est.r_squared = fit.r2;
    const double tq =
        fit.points > 2 ? stats::t_quantile(fit.points - 2, 0.5 + conf / 2) : 0.0;
    est.rate_ci_half = tq * fit.slope_se;

    // Curvature surrogate first: a genuinely slower-than-exponential tail
    // shows a decay rate collapsing along the grid, which a short grid can
    // hide from the r^2 test.
    const int half = est.fit_points / 2;
    if (half >= 2) {
        const auto sub = [&](std::size_t b, std::size_t e) {
            return stats::weighted_linfit(
                std::vector<double>(fx.begin() + b, fx.begin() + e),
                std::vector<double>(fy.begin() + b, fy.begin() + e),
                std::vector<double>(fw.begin() + b, fw.begin() + e));
        };
        const auto fl = sub(0, static_cast<std::size_t>(half));
        const auto fu = sub(fx.size() - static_cast<std::size_t>(half), fx.size());
        const double rate_lo = -fl.slope, rate_hi = -fu.slope;
        const double tl =
            fl.points > 2 ? stats::t_quantile(fl.points - 2, 0.5 + conf / 2) : 0.0;
        const bool lo_positive = rate_lo > 0 && rate_lo - tl * fl.slope_se > 0;
        if (lo_positive && rate_hi < 0.5 * rate_lo) {
            est.classification = TailClass::Subexponential;
            return est;
        }
    }
    if (est.r_squared >= 0.98 && est.rate > 0 && est.rate - est.rate_ci_half > 0) {
        est.classification = TailClass::Exponential;
        return est;
    }
    est.classification = TailClass::Inconclusive;
    return est;
}

FiniteSizeResult finite_size_check(const CrossingSamples& samples, int n,
                                   double eps_hat, double conf) {
    if (samples.count < 10)
        throw std::invalid_argument("finite_size_check: insufficient samples");
    if (samples.v_hits < 0 || samples.h_hits < 0 || samples.v_hits > samples.count ||
        samples.h_hits > samples.count)
        throw std::invalid_argument("finite_size_check: malformed tallies");
    if (!(eps_hat > 0 && eps_hat < 1))
        throw std::invalid_argument("finite_size_check: eps_hat outside (0,1)");

    FiniteSizeResult r;
    r.eps_hat = eps_hat;
    r.n = n;
    r.v_upper = stats::wilson(samples.v_hits, samples.count, conf).hi;
    r.h_lower = stats::wilson(samples.h_hits, samples.count, conf).lo;
    if (r.v_upper < eps_hat)
        r.decision = PhaseDecision::Subcritical;
    else if (r.h_lower > 1 - eps_hat)
        r.decision = PhaseDecision::Supercritical;
    return r;
}

CrossingSamples sample_crossings(const RateSet& rates, const Geometry& geom, int n,
                                 int count, double burn_in, double gap,
                                 RngStream& rng) {
    rates.validate();
    geom.validate();
    if (n < 1) throw std::invalid_argument("sample_crossings: n < 1");
    if (count < 1) throw std::invalid_argument("sample_crossings: count < 1");
    if (burn_in < 0 || gap <= 0)
        throw std::invalid_argument("sample_crossings: bad burn_in/gap");
    if (3 * n + 1 > geom.width || n + 1 > geom.height)
        throw std::invalid_argument("sample_crossings: window exceeds geometry");

    Engine eng(Configuration::filled(geom, kPlus), rates);
    double t = 0;
    const auto advance_to = [&](double target) {
        while (t < target) {
            const EventDescriptor ev = eng.step_capped(rng, target - t);
            if (ev.absorbed || ev.censored) {
                t = target;
                return;
            }
            t += ev.dt;
        }
    };

    CrossingSamples out;
    for (int k = 0; k < count; ++k) {
        advance_to(burn_in + static_cast<double>(k) * gap);
        CrossWindow w;
        w.m = 3 * n;
        w.n = n;
        if (geom.kind == GeomKind::Torus) {
            w.x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(geom.width)));
            w.y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(geom.height)));
        }
        out.v_hits += crossing(eng.config(), w, CrossDir::Vertical);
        out.h_hits += crossing(eng.config(), w, CrossDir::Horizontal);
        ++out.count;
    }
    return out;
}

ScanResult h_perc_scan(const ScanConfig& cfg, RngStream& rng) {
    if (cfg.lambda_grid.empty())
        throw std::invalid_argument("h_perc_scan: empty lambda grid");
    for (std::size_t i = 1; i < cfg.lambda_grid.size(); ++i)
        if (cfg.lambda_grid[i] <= cfg.lambda_grid[i - 1])
            throw std::invalid_argument("h_perc_scan: lambda grid must increase");
    if (cfg.bisection_tol <= 0 || cfg.h_max <= 0)
        throw std::invalid_argument("h_perc_scan: bad bisection parameters");

    ScanResult res;
    res.n = cfg.n;
    res.eps_hat = cfg.eps_hat;

    for (const double lambda : cfg.lambda_grid) {
        ScanEntry entry;
        entry.lambda = lambda;
        const auto probe = [&](double h) {
            RateSet r = cfg.rates;
            r.lambda = lambda;
            r.h = h;
            const CrossingSamples s =
                sample_crossings(r, cfg.geom, cfg.n, cfg.samples_per_probe,
                                 cfg.burn_in, cfg.sample_gap, rng);
            const FiniteSizeResult f =
                finite_size_check(s, cfg.n, cfg.eps_hat, cfg.conf);
            entry.trace.push_back({h, f.decision, f.v_upper, f.h_lower});
            return f.decision;
        };

        if (probe(0.0) == PhaseDecision::Supercritical) {
            entry.super_at_zero = true;
            entry.bracketed = true;
            entry.h_lo = 0;
            entry.h_hi = std::min(cfg.bisection_tol, cfg.h_max);
        } else if (probe(cfg.h_max) != PhaseDecision::Supercritical) {
            entry.bracketed = false;
            entry.h_lo = cfg.h_max;
            entry.h_hi = std::numeric_limits<double>::infinity();
        } else {
            double lo = 0, hi = cfg.h_max;
            while (hi - lo > cfg.bisection_tol) {
                const double mid = 0.5 * (lo + hi);
                if (probe(mid) == PhaseDecision::Supercritical)
                    hi = mid;
                else
                    lo = mid;
            }
            entry.bracketed = true;
            entry.h_lo = lo;
            entry.h_hi = hi;
        }
        entry.h_perc_hat = entry.bracketed
                               ? 0.5 * (entry.h_lo + entry.h_hi)
                               : std::numeric_limits<double>::infinity();
        res.entries.push_back(std::move(entry));
    }

    for (std::size_t i = 0; i + 1 < res.entries.size(); ++i) {
        const ScanEntry& a = res.entries[i];
        const ScanEntry& b = res.entries[i + 1];
        if (!a.bracketed || !b.bracketed) continue;
        const double alpha = b.lambda - a.lambda;
        if (!(b.h_lo <= a.h_hi)) res.monotone_ok = false;
        if (!(b.h_hi >= a.h_lo - 4 * alpha)) res.envelope_ok = false;
    }
    return res;
}

}  // namespace contact
