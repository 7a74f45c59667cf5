#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <vector>

namespace mmot {

// Dense-basis linear programming engine: bounded-variable revised primal
// simplex with an explicit basis inverse, Dantzig pricing and a Bland
// anti-cycling fallback. Scope is deliberately small: the cutting-plane
// master problems and branch-and-bound node relaxations solved here have at
// most a few thousand columns.

enum class LPStatus { Optimal, Infeasible, Unbounded };

constexpr double kInf = std::numeric_limits<double>::infinity();

struct LPProblem {
    enum class Sense { Min, Max };
    Sense sense = Sense::Min;
    std::vector<double> c;
    std::vector<std::vector<double>> a_eq;  // dense rows
    std::vector<double> b_eq;
    std::vector<std::vector<double>> a_le;
    std::vector<double> b_le;
    // Per-variable bounds; +-infinity allowed. Empty vectors default to
    // [0, +inf) for every variable.
    std::vector<double> lower;
    std::vector<double> upper;
};

struct LPSolution {
    LPStatus status = LPStatus::Optimal;
    std::vector<double> primal;
    // One multiplier per constraint, equality rows first, then inequality
    // rows, with signs matching the posed objective sense (for Max problems
    // with <= rows the multipliers come out nonnegative).
    std::vector<double> dual;
    std::vector<double> reduced_costs;
    double objective = 0.0;
    // b'y plus the bound terms sum_j d_j x_j over nonbasic variables at
    // finite bounds; equals the objective at optimality.
    double dual_objective = 0.0;
    std::vector<int> basis;  // engine column ids, one per row
    int iterations = 0;
};

// One-shot solve; a fresh engine per call.
LPSolution solve(const LPProblem& problem);

// ---------------------------------------------------------------------------
// Incremental engine. Used directly by the cutting-plane master loop (which
// appends columns between solves) and by branch-and-bound (which retightens
// variable bounds between solves). Rows are fixed at construction: n_eq
// equality rows followed by n_le inequality (<=) rows, each of which gets an
// internal logical column (artificial with bounds [0,0] for equalities,
// slack in [0, inf) for inequalities).

struct SparseCol {
    std::vector<int> index;
    std::vector<double> value;
};

class SimplexEngine {
public:
    SimplexEngine(std::size_t n_eq, std::size_t n_le, std::vector<double> rhs);

    // Appends a structural column; returns its engine column id. New columns
    // start nonbasic at their finitemost bound.
    int add_column(const SparseCol& col, double cost, double lo, double hi);

    std::size_t rows() const { return n_rows_; }
    std::size_t structural_columns() const { return n_structural_; }

    void set_bounds(int col, double lo, double hi);
    void set_cost(int col, double cost);

    // Replaces the basis (one engine column id per row) and marks the
    // factorization stale. Column ids may include logical columns.
    void set_basis(const std::vector<int>& basis, const std::vector<std::int8_t>* at_upper);

    // Primal simplex from the current state: Phase I restores feasibility if
    // bound edits broke it, Phase II optimizes. Throws NumericalError when
    // residual checks fail after refactorization or the pivot cap is hit.
    LPStatus solve();

    double objective() const;
    double x(int col) const { return x_[static_cast<std::size_t>(col)]; }
    double dual(int row) const { return y_[static_cast<std::size_t>(row)]; }
    double reduced_cost(int col) const;
    const std::vector<int>& basis() const { return basis_; }
    std::vector<std::int8_t> upper_flags() const;
    bool is_basic(int col) const { return vstat_[static_cast<std::size_t>(col)] == VStat::Basic; }
    double lower_bound(int col) const { return lo_[static_cast<std::size_t>(col)]; }
    double upper_bound(int col) const { return up_[static_cast<std::size_t>(col)]; }
    long pivots() const { return total_pivots_; }

private:
    enum class VStat : std::int8_t { Basic, AtLower, AtUpper, FreeNB };

    void refactor();
    void rebuild_basic_values();
    void ftran(const SparseCol& col, Eigen::VectorXd& w) const;
    void price(bool phase_one, Eigen::VectorXd& y_out, std::vector<double>& d_out) const;
    LPStatus iterate(bool phase_one);
    bool basic_infeasible() const;
    double infeasibility() const;
    void snap_nonbasic();

    std::size_t n_rows_ = 0;
    std::size_t n_eq_ = 0;
    std::size_t n_structural_ = 0;  // structural column count
    std::vector<SparseCol> cols_;   // logical columns first, then structurals
    std::vector<double> cost_;
    std::vector<double> lo_, up_;
    std::vector<double> rhs_;

    std::vector<int> basis_;
    std::vector<VStat> vstat_;
    std::vector<double> x_;
    Eigen::MatrixXd binv_;
    Eigen::VectorXd y_;  // duals of the last priced iteration
    bool factor_stale_ = true;
    int pivots_since_refactor_ = 0;
    long total_pivots_ = 0;
};

}  // namespace mmot
