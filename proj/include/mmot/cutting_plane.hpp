#pragma once

#include <functional>
#include <vector>

#include "mmot/cost.hpp"
#include "mmot/cover.hpp"
#include "mmot/measure.hpp"
#include "mmot/oracle.hpp"

namespace mmot {

// Initial coupling by greedy simultaneous exhaustion of the per-marginal
// vertex masses (the integrals of every vertex hat, index 0..m_i, against
// marginal i): walk all marginals left to right, always emitting an atom at
// the current vertex tuple with the smallest remaining mass. flag = 1 records
// that at some step more than one marginal ran out while vertices remained,
// in which case the active set is conservatively augmented with every
// single-coordinate vertex perturbation of the atoms; with flag = 0 the
// active set is exactly the m+1 atoms.
struct InitResult {
    DiscreteMeasure measure;
    std::vector<std::vector<double>> active;
    int flag = 0;
};
InitResult init_algorithm0(const std::vector<std::vector<double>>& vertex_masses,
                           const std::vector<std::vector<double>>& vertices);

// One master iteration of the cutting-plane loop, as logged: master value,
// the normalization dual y0, the oracle's certified lower bound s, the gap
// y0 - s, the active-point count the master was solved over, and the oracle
// wall time in seconds.
struct IterationRow {
    long r = 0;
    double alpha = 0.0;
    double y0 = 0.0;
    double s = 0.0;
    double gap = 0.0;
    std::size_t active_size = 0;
    double oracle_seconds = 0.0;
};

struct LsipResult {
    double alpha_ub = 0.0;   // master value at exit, the attained relaxed cost
    double alpha_lb = 0.0;   // alpha_ub - y0 + s, certified lower bound
    double y0_hat = 0.0;     // shifted dual offset s making (y0_hat, y_hat) feasible
    DualVector y_hat;        // y_hat.y0 == y0_hat
    DiscreteMeasure mu_hat;  // primal weights over the active points
    std::vector<IterationRow> log;
    bool converged = false;  // false when the cut budget ran out first
    long cuts_added = 0;
};

using OracleFn = std::function<OracleResult(const DualVector&)>;

// Cutting-plane solve of the moment-constrained relaxation. The master is
// the column form over active points (minimize sum f(x) w_x subject to
// sum w = 1 and moment rows sum g_{i,j}(x_i) w_x = gbar_{i,j}); its duals are
// the separation weights handed to the oracle, whose near-optimal pool points
// become new columns. Terminates when y0 - s <= eps_lsip; stops early with
// converged = false once max_cuts cut points have been added (the bounds
// are still valid, just further apart than eps_lsip).
//
// Throws NumericalError when the master becomes unsolvable or when every
// oracle point deduplicates away (1e-12 tolerance) while the gap still
// exceeds eps_lsip.
LsipResult run_algorithm1(const CPWACost& f, const std::vector<TestBasis>& bases,
                          const std::vector<std::vector<double>>& gbar,
                          const std::vector<std::vector<double>>& active0,
                          const OracleFn& oracle, double eps_lsip,
                          long max_cuts = 100000);

// Largest moment residual max_{i,j} |sum_x w_x g_{i,j}(x_i) - gbar_{i,j}|;
// passes at 1e-8.
struct MomentReport {
    double max_residual = 0.0;
    bool pass = false;
};
MomentReport verify_moment_feasibility(const DiscreteMeasure& mu,
                                       const std::vector<TestBasis>& bases,
                                       const std::vector<std::vector<double>>& gbar);

}  // namespace mmot
