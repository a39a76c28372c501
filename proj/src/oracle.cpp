#include "contact/oracle.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace contact {

namespace {

std::int64_t pow3(int n) {
    std::int64_t p = 1;
    while (n-- > 0) p *= 3;
    return p;
}

// All (target_state, rate) transitions of one site, read off the model's
// table.  Written independently of the engine's propensity code on purpose:
// the two are compared in tests.
void site_transitions(const RateSet& r, SiteState s, int n1,
                      SiteState out_to[2], double out_rate[2], int& n_out) {
    n_out = 0;
    auto add = [&](SiteState to, double rate) {
        if (rate > 0) {
            out_to[n_out] = to;
            out_rate[n_out] = rate;
            ++n_out;
        }
    };
    if (r.model == Model::A) {
        if (s == kPlus) add(kZero, r.kappa);
        if (s == kZero) {
            add(kMinus, r.kappa_tilde_or_star);
            add(kPlus, r.h + r.lambda * n1);
        }
        if (s == kMinus) add(kZero, r.h_tilde + r.lambda_tilde * n1);
    } else {
        if (s == kPlus) {
            add(kZero, r.kappa);
            add(kMinus, r.kappa_tilde_or_star);
        }
        if (s == kZero) {
            add(kMinus, r.kappa_tilde_or_star);
            add(kPlus, r.h + r.lambda * n1);
        }
        if (s == kMinus) add(kZero, r.h_tilde);
    }
}

// Strongly connected components (iterative Tarjan) of the positive-rate
// transition digraph; returns component id per state and the component count.
int scc(const Eigen::SparseMatrix<double, Eigen::RowMajor>& Q, std::vector<int>& comp) {
    const int n = static_cast<int>(Q.rows());
    comp.assign(n, -1);
    std::vector<int> index(n, -1), low(n, 0), on_stack(n, 0);
    std::vector<int> stack;
    int next_index = 0, n_comp = 0;

    struct Frame {
        int v;
        Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it;
    };
    std::vector<Frame> call;

    for (int root = 0; root < n; ++root) {
        if (index[root] != -1) continue;
        call.push_back({root, {Q, root}});
        index[root] = low[root] = next_index++;
        stack.push_back(root);
        on_stack[root] = 1;
        while (!call.empty()) {
            Frame& f = call.back();
            bool descended = false;
            for (; f.it; ++f.it) {
                if (f.it.value() <= 0 || f.it.col() == f.v) continue;
                const int w = static_cast<int>(f.it.col());
                if (index[w] == -1) {
                    index[w] = low[w] = next_index++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    ++f.it;
                    call.push_back({w, {Q, w}});
                    descended = true;
                    break;
                }
                if (on_stack[w]) low[f.v] = std::min(low[f.v], index[w]);
            }
            if (descended) continue;
            const int v = f.v;
            call.pop_back();
            if (!call.empty()) {
                const int p = call.back().v;
                low[p] = std::min(low[p], low[v]);
            }
            if (low[v] == index[v]) {
                for (;;) {
                    const int w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                    comp[w] = n_comp;
                    if (w == v) break;
                }
                ++n_comp;
            }
        }
    }
    return n_comp;
}

}  // namespace

std::int64_t GeneratorMatrix::encode(const Configuration& c) const {
    std::int64_t idx = 0, p = 1;
    for (int i = 0; i < n_sites; ++i, p *= 3)
        idx += static_cast<std::int64_t>(c.states[static_cast<std::size_t>(i)] + 1) * p;
    return idx;
}

Configuration GeneratorMatrix::decode(std::int64_t idx) const {
    Configuration c = Configuration::filled(geom, kZero);
    for (int i = 0; i < n_sites; ++i) {
        c.states[static_cast<std::size_t>(i)] = static_cast<SiteState>(idx % 3 - 1);
        idx /= 3;
    }
    return c;
}

GeneratorMatrix build_generator(const RateSet& rates, const Geometry& geom) {
    rates.validate();
    geom.validate();
    const int n = geom.sites();
    if (n > 9) throw std::invalid_argument("build_generator: lattice larger than 9 sites");

    GeneratorMatrix g;
    g.geom = geom;
    g.rates = rates;
    g.n_sites = n;
    g.dim = pow3(n);

    std::vector<Eigen::Triplet<double>> trips;
    Configuration c = Configuration::filled(geom, kZero);
    for (std::int64_t s = 0; s < g.dim; ++s) {
        // Decode in place.
        std::int64_t rem = s;
        for (int i = 0; i < n; ++i) {
            c.states[static_cast<std::size_t>(i)] = static_cast<SiteState>(rem % 3 - 1);
            rem /= 3;
        }
        double diag = 0;
        for (int site = 0; site < n; ++site) {
            const int n1 = c.ones_in_neighborhood(site);
            SiteState to[2];
            double rate[2];
            int cnt = 0;
            site_transitions(rates, c.at(site), n1, to, rate, cnt);
            for (int k = 0; k < cnt; ++k) {
                const std::int64_t target =
                    s + static_cast<std::int64_t>(to[k] - c.at(site)) * pow3(site);
                trips.emplace_back(static_cast<int>(s), static_cast<int>(target), rate[k]);
                diag += rate[k];
            }
        }
        if (diag > 0) trips.emplace_back(static_cast<int>(s), static_cast<int>(s), -diag);
    }
    g.Q.resize(static_cast<int>(g.dim), static_cast<int>(g.dim));
    g.Q.setFromTriplets(trips.begin(), trips.end());
    g.Q.makeCompressed();
    return g;
}

Eigen::VectorXd stationary(const GeneratorMatrix& gen) {
    const int n = static_cast<int>(gen.dim);

    std::vector<int> comp;
    const int n_comp = scc(gen.Q, comp);
    if (n_comp != 1) {
        // Closed classes: components with no positive rate leaving them.
        std::vector<char> open(static_cast<std::size_t>(n_comp), 0);
        for (int i = 0; i < n; ++i)
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(gen.Q, i);
                 it; ++it)
                if (it.value() > 0 && comp[i] != comp[it.col()])
                    open[static_cast<std::size_t>(comp[i])] = 1;
        std::ostringstream msg;
        msg << "stationary: chain reducible (" << n_comp << " classes); closed classes:";
        int listed = 0;
        for (int cid = 0; cid < n_comp && listed < 5; ++cid) {
            if (open[static_cast<std::size_t>(cid)]) continue;
            int size = 0, rep = -1;
            for (int i = 0; i < n; ++i)
                if (comp[i] == cid) {
                    ++size;
                    if (rep < 0) rep = i;
                }
            msg << " {size " << size << ", state " << rep << "}";
            ++listed;
        }
        throw std::runtime_error(msg.str());
    }

    // Q^T pi = 0 with one balance equation replaced by sum(pi) = 1.
    const int replaced = n - 1;
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < n; ++i)
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(gen.Q, i); it;
             ++it)
            if (it.col() != replaced) trips.emplace_back(static_cast<int>(it.col()), i, it.value());
    for (int i = 0; i < n; ++i) trips.emplace_back(replaced, i, 1.0);

    Eigen::SparseMatrix<double> M(n, n);
    M.setFromTriplets(trips.begin(), trips.end());
    M.makeCompressed();

    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b[replaced] = 1.0;

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(M);
    lu.factorize(M);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("stationary: sparse LU factorization failed");
    Eigen::VectorXd pi = lu.solve(b);

    for (int i = 0; i < n; ++i) pi[i] = std::max(pi[i], 0.0);
    pi /= pi.sum();

    const double residual = (gen.Q.transpose() * pi).cwiseAbs().maxCoeff();
    if (residual > 1e-10)
        throw std::runtime_error("stationary: residual above 1e-10");
    return pi;
}

namespace {

// One uniformized window: distribution after time t, truncation error <= tol.
Eigen::VectorXd uniformized(const GeneratorMatrix& gen, const Eigen::VectorXd& d0,
                            double t, double lam, double tol) {
    const double m = lam * t;
    Eigen::VectorXd cur = d0;
    double w = std::exp(-m);
    double cum = w;
    Eigen::VectorXd out = w * cur;
    const std::int64_t k_cap =
        static_cast<std::int64_t>(m + 12.0 * std::sqrt(m + 1.0) + 40.0);
    for (std::int64_t k = 1; cum < 1.0 - tol && k <= k_cap; ++k) {
        cur += (gen.Q.transpose() * cur) / lam;  // cur <- cur P, P = I + Q/lam
        w *= m / static_cast<double>(k);
        cum += w;
        out += w * cur;
    }
    out += (1.0 - cum) * cur;  // assign residual mass; keeps sum(out) = sum(d0)
    return out;
}

}  // namespace

Eigen::VectorXd transient(const GeneratorMatrix& gen, const Eigen::VectorXd& initial,
                          double t) {
    if (t < 0) throw std::invalid_argument("transient: negative time");
    if (initial.size() != gen.dim)
        throw std::invalid_argument("transient: distribution dimension mismatch");
    if (t == 0) return initial;

    double max_exit = 0;
    for (int i = 0; i < gen.dim; ++i)
        max_exit = std::max(max_exit, -gen.Q.coeff(i, i));
    if (max_exit <= 0) return initial;  // zero generator
    const double lam = max_exit * 1.05;

    // Chunk so each window's Poisson mean stays moderate; error adds across
    // windows by the exact semigroup property.
    const int chunks = std::max(1, static_cast<int>(std::ceil(lam * t / 400.0)));
    const double tol = 1e-10 / chunks;
    Eigen::VectorXd d = initial;
    for (int i = 0; i < chunks; ++i) d = uniformized(gen, d, t / chunks, lam, tol);
    return d;
}

double tv_restricted(const Eigen::VectorXd& d1, const Eigen::VectorXd& d2, int n_sites,
                     const std::vector<int>& site_subset) {
    if (d1.size() != d2.size())
        throw std::invalid_argument("tv_restricted: dimension mismatch");
    if (site_subset.empty()) return 0.0;
    for (int s : site_subset)
        if (s < 0 || s >= n_sites)
            throw std::invalid_argument("tv_restricted: site outside lattice");

    const int k = static_cast<int>(site_subset.size());
    std::int64_t mdim = 1;
    for (int i = 0; i < k; ++i) mdim *= 3;
    std::vector<double> m1(static_cast<std::size_t>(mdim), 0.0);
    std::vector<double> m2(static_cast<std::size_t>(mdim), 0.0);

    std::vector<std::int64_t> p3(static_cast<std::size_t>(n_sites), 1);
    for (int i = 1; i < n_sites; ++i) p3[static_cast<std::size_t>(i)] = p3[static_cast<std::size_t>(i - 1)] * 3;

    for (std::int64_t s = 0; s < d1.size(); ++s) {
        std::int64_t idx = 0, f = 1;
        for (int j = 0; j < k; ++j, f *= 3)
            idx += ((s / p3[static_cast<std::size_t>(site_subset[static_cast<std::size_t>(j)])]) % 3) * f;
        m1[static_cast<std::size_t>(idx)] += d1[s];
        m2[static_cast<std::size_t>(idx)] += d2[s];
    }
    double tv = 0;
    for (std::int64_t i = 0; i < mdim; ++i)
        tv += std::abs(m1[static_cast<std::size_t>(i)] - m2[static_cast<std::size_t>(i)]);
    return tv / 2.0;
}

Eigen::VectorXd point_mass(const GeneratorMatrix& gen, const Configuration& c) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(gen.dim);
    d[gen.encode(c)] = 1.0;
    return d;
}

}  // namespace contact
