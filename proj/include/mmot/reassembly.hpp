#pragma once

#include <cstdint>
#include <vector>

#include "mmot/cost.hpp"
#include "mmot/marginal.hpp"
#include "mmot/measure.hpp"
#include "mmot/rng.hpp"

namespace mmot {

// Feasible coupling built on the atoms of a moment-feasible discrete measure:
// for each marginal i, the sorted atom projection splits [0, 1] into quantile
// intervals with lengths equal to the projected weights, and the conditional
// law of Y_i given atom k is the marginal's quantile restricted to that
// interval. Each pair (X_i, Y_i) is then the comonotone coupling of the
// projection with the true marginal, so the law of Y_i is exactly marginal i
// and E|X_i - Y_i| is their 1-Wasserstein distance. Across marginals the
// conditionals are drawn with independent uniforms given the atom.
struct CouplingSampler {
    DiscreteMeasure mu;                // atoms of the coupled discrete measure
    std::vector<Marginal1D> marginals;
    std::vector<double> atom_cum;      // cumulative atom weights, last entry 1
    // Quantile interval (q_lo[i][k], q_hi[i][k]] of marginal i for atom k.
    // Atoms sharing the i-th coordinate carry one merged interval.
    std::vector<std::vector<double>> q_lo, q_hi;

    std::size_t dims() const { return marginals.size(); }

    // Draws one coupled pair: x is the atom of mu, y the reassembled point.
    // Buffers are resized as needed so hot loops can reuse them.
    void sample(Rng& rng, std::vector<double>& x, std::vector<double>& y) const;
};

CouplingSampler build_sampler(const DiscreteMeasure& mu,
                              const std::vector<Marginal1D>& marginals);

// Sorted projection of a measure onto coordinate i with exactly equal
// coordinates merged; the inputs to the 1-Wasserstein distance below.
void project_measure(const DiscreteMeasure& mu, std::size_t i, std::vector<double>& atoms,
                     std::vector<double>& weights);

// Exact 1-Wasserstein distance between the discrete law (atoms, weights) and
// the marginal: the integral of |F_discrete - F_marginal|, evaluated in
// closed form segment by segment between the discrete atoms.
double w1_discrete_vs_marginal(const std::vector<double>& atoms,
                               const std::vector<double>& weights, const Marginal1D& m);

// Replicated Monte Carlo mean. The 95% interval is mean +- 1.96 se where
// se is the sample standard deviation of the replication means over sqrt(reps)
// (zero when reps == 1). ucb gives one-sided upper confidence bounds, e.g.
// z = 3.090232306167813 for 99.9%.
struct MCEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    long reps = 0;
    long n = 0;  // samples per replication
    double ci_lo = 0.0;
    double ci_hi = 0.0;

    double ucb(double z) const { return mean + z * std_error; }
};

// Estimates the expected cost over the reassembled coupling: reps independent
// replications, each averaging n draws of f(Y). Replication r always uses
// Rng::stream(seed, 3, r), so the result is bitwise deterministic for a fixed
// seed no matter how many worker threads run the replications.
MCEstimate estimate_upper_bound(const CPWACost& f, const CouplingSampler& s, long n,
                                long reps, std::uint64_t seed, unsigned threads = 1);

// Exact reassembly when every marginal is finitely supported: intersect the
// quantile intervals of each atom with the marginals' cumulative intervals
// and take the product of the resulting conditionals. Throws DomainError when
// a marginal is continuous. Output points are sorted lexicographically.
DiscreteMeasure reassemble_discrete_exact(const DiscreteMeasure& mu,
                                          const std::vector<Marginal1D>& marginals);

}  // namespace mmot
