// Exact finite-CTMC computations on tiny lattices (N <= 9 sites): generator
// construction, stationary distributions, transient laws by uniformization,
// and total-variation distances of marginals.  This module is a test
// instrument used as ground truth for the Monte Carlo components; it shares
// the neighbor-slot convention with lattice-core but enumerates transition
// propensities independently of the simulation engine.
//
// State encoding (fixed so test vectors are portable): base-3, site-major.
// Site i (row-major index) contributes digit (state+1) * 3^i, so state index
//   idx = sum_i (states[i] + 1) * 3^i.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <vector>

#include "contact/lattice.hpp"

namespace contact {

struct GeneratorMatrix {
    Geometry geom;
    RateSet rates;
    int n_sites = 0;
    std::int64_t dim = 0;  // 3^n_sites
    Eigen::SparseMatrix<double, Eigen::RowMajor> Q;  // row sums 0

    std::int64_t encode(const Configuration& c) const;
    Configuration decode(std::int64_t idx) const;
};

// Exact generator for the model's rate table on the given geometry, torus
// neighbor multiplicity included.  Errors if the lattice has more than 9
// sites.
GeneratorMatrix build_generator(const RateSet& rates, const Geometry& geom);

// Solves pi Q = 0, sum(pi) = 1 by sparse LU; verifies the residual is
// <= 1e-10.  Errors on a reducible chain, listing its closed classes.
Eigen::VectorXd stationary(const GeneratorMatrix& gen);

// Distribution at time t from `initial` (a probability vector over the 3^N
// states), by uniformization with truncation error <= 1e-10.  Large
// lambda*t is handled by exact semigroup chunking.
Eigen::VectorXd transient(const GeneratorMatrix& gen, const Eigen::VectorXd& initial,
                          double t);

// Half L1 distance between the marginals of two distributions on the given
// site subset.  Empty subset -> 0 by convention.
double tv_restricted(const Eigen::VectorXd& d1, const Eigen::VectorXd& d2,
                     int n_sites, const std::vector<int>& site_subset);

// Point mass on one configuration, in the fixed encoding.
Eigen::VectorXd point_mass(const GeneratorMatrix& gen, const Configuration& c);

}  // namespace contact
