#pragma once

#include <cstdint>
#include <vector>

#include "mmot/cost.hpp"
#include "mmot/cover.hpp"

namespace mmot {

// Dual iterate of the cutting-plane master: the scalar y0 plus one weight per
// test function of each marginal (y[i][j-1] multiplies hat j of marginal i).
struct DualVector {
    double y0 = 0.0;
    std::vector<std::vector<double>> y;
};

// Sparse linear constraint row over the model's column ids.
struct LinearRow {
    std::vector<int> index;
    std::vector<double> value;
    double rhs = 0.0;
};

// Mixed-integer encoding of the separation problem
//
//   min_x  f(x) - y0 - sum_i sum_j y[i][j] g_{i,j}(x_i)
//
// over the product of the cover intervals. Columns are laid out contiguously:
//
//   x_i        x_off + i                     coordinate variables
//   lambda_k   lambda_off + k                one per positive block of f
//   zeta_k     zeta_off + k                  one per negative block of f
//   s_{k,q}    s_off + offset(k) + q         slack per negative piece
//   z_{i,j}    z_off + offset(i) + (j-1)     cell fill levels, j = 1..m_i
//   delta_{k,q} delta_off + offset(k) + q    binary, selects the active piece
//   iota_{i,j} iota_off + offset(i) + (j-1)  binary, orders the fills, j < m_i
//
// Rows, grouped by role:
//   rows_pos_le     <a_p, x> - lambda_k <= -b_p           per positive piece
//   rows_neg_eq     <a_q, x> + s_{k,q} - zeta_k = -b_q    per negative piece
//   rows_couple_le  s_{k,q} + M_{k,q} delta_{k,q} <= M_{k,q}
//   rows_delta_eq   sum_q delta_{k,q} = 1                 per negative block
//   rows_xz_eq      x_i - sum_j (kappa_j - kappa_{j-1}) z_{i,j} = kappa_0
//   rows_chain_le   z_{i,j+1} - iota_{i,j} <= 0  and  iota_{i,j} - z_{i,j} <= 0
//
// The model objective is obj . v + objective_offset where objective_offset
// carries the -y0 constant; the z coefficients are -(y[i][j] - y[i][j-1]).
struct MILPModel {
    int n_cols = 0;
    int x_off = 0;
    int lambda_off = 0;
    int zeta_off = 0;
    int s_off = 0;
    int z_off = 0;
    int delta_off = 0;
    int iota_off = 0;

    std::vector<double> obj;
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<std::uint8_t> binary;

    std::vector<LinearRow> rows_pos_le;
    std::vector<LinearRow> rows_neg_eq;
    std::vector<LinearRow> rows_couple_le;
    std::vector<LinearRow> rows_delta_eq;
    std::vector<LinearRow> rows_xz_eq;
    std::vector<LinearRow> rows_chain_le;

    double objective_offset = 0.0;

    // Problem data kept alongside the encoding so the solver can branch on
    // cells and evaluate candidates exactly.
    CPWACost cost;
    std::vector<std::vector<double>> knots;  // per dim, m_i + 1 entries
    std::vector<std::vector<double>> yw;     // per dim, m_i dual weights
    std::vector<std::vector<double>> big_m;  // per negative block, per piece

    std::size_t dims() const { return knots.size(); }
    std::size_t hats(std::size_t i) const { return yw[i].size(); }
    std::size_t total_rows() const {
        return rows_pos_le.size() + rows_neg_eq.size() + rows_couple_le.size() +
               rows_delta_eq.size() + rows_xz_eq.size() + rows_chain_le.size();
    }

    // Coordinate induced by the fill levels of dimension i (the xz row solved
    // for x_i) and the z part of the objective, both used by encoding tests.
    double x_from_z(std::size_t i, const std::vector<double>& z) const;
    double z_term(const std::vector<std::vector<double>>& z) const;
};

// Outcome of a global separation solve: the best point found, its exact
// objective value, a proven lower bound on the true minimum, and a pool of
// near-optimal points (always containing x).
struct OracleResult {
    std::vector<double> x;
    double value = 0.0;
    double bound = 0.0;
    double gap = 0.0;
    std::vector<std::vector<double>> pool;
    long nodes = 0;
};

// Exact objective of the separation problem without the y0 constant,
// f(x) - sum_i sum_j y[i][j] g_{i,j}(x_i).
double oracle_objective(const CPWACost& f, const std::vector<TestBasis>& bases,
                        const DualVector& y, const std::vector<double>& x);

// Assembles the mixed-integer encoding above. Throws DomainError when the
// number of bases or dual weight vectors does not match the cost dimension.
MILPModel build_milp(const CPWACost& f, const std::vector<TestBasis>& bases,
                     const DualVector& y);

// Branch-and-bound global solve of the encoding. Best-first on the node
// bound with diving, branching on the most fractional piece selector or on
// the cell interval with the largest envelope slack. Returns once the
// incumbent is proven within eps_milp of the true minimum; pool holds all
// incumbents within pool_slack of the final value, capped at 32. Throws
// BudgetError past node_cap nodes.
OracleResult solve_bb(const MILPModel& model, double eps_milp = 1e-8,
                      double pool_slack = 1e-6, long node_cap = 500000);

// Brute-force check on a regular grid with spacing h per dimension (the right
// endpoint is always included). value is the minimum over the grid; the true
// minimum is at least value - certificate, with
//   certificate = (L_f + sum_{i,j} |y[i][j]| L(g_{i,j})) * h * dims / 2.
// Throws BudgetError when the grid exceeds point_cap points.
struct GridResult {
    double value = 0.0;
    double certificate = 0.0;
    std::vector<double> x;
};
GridResult grid_oracle(const CPWACost& f, const std::vector<TestBasis>& bases,
                       const DualVector& y, double h,
                       std::uint64_t point_cap = std::uint64_t{1} << 28);

// Exact separation for finitely supported marginals: enumerates the product
// of the per-dimension point lists. gap is 0; pool as in solve_bb. Throws
// BudgetError when the product exceeds point_cap points.
OracleResult enumerate_oracle(const CPWACost& f,
                              const std::vector<TestBasis>& bases,
                              const DualVector& y,
                              const std::vector<std::vector<double>>& points,
                              double pool_slack = 1e-6,
                              std::uint64_t point_cap = std::uint64_t{1} << 24);

}  // namespace mmot
