#pragma once

#include <cstdint>
#include <vector>

#include "mmot/json.hpp"
#include "mmot/marginal.hpp"

namespace mmot {

// One-dimensional covers: a strictly increasing knot grid over a marginal's
// support interval. Cells are the intervals between consecutive knots; the
// mesh is the widest cell.

struct Cover1D {
    std::vector<double> knots;

    static Cover1D uniform(double lo, double hi, std::size_t cells);
    static Cover1D from_knots(std::vector<double> knots);

    std::size_t cells() const { return knots.size() - 1; }
    double lo() const { return knots.front(); }
    double hi() const { return knots.back(); }
    double mesh() const;

    Json serialize() const { return Json(knots); }
};

// Hat-function basis over a cover. The full vertex interpolation family has
// one hat per knot (indices 0..m); the basis drops the hat at the left end,
// so eval produces m values indexed by knots 1..m. This keeps the family
// linearly independent together with the constant function.
class TestBasis {
public:
    explicit TestBasis(Cover1D cover);

    std::size_t size() const { return cover_.cells(); }  // m basis functions
    const Cover1D& cover() const { return cover_; }

    // Dense evaluation of (g_1(x), ..., g_m(x)).
    // Throws DomainError when x lies outside [knot_0, knot_m] by more than a
    // 1e-9 relative guard; values inside the guard band are clamped.
    std::vector<double> eval(double x) const;

    // Sparse evaluation: writes up to two (index, value) pairs with 1-based
    // hat indices and returns how many were written. Same domain rule.
    int eval_sparse(double x, int index[2], double value[2]) const;

    // Single hat g_j for 1 <= j <= m.
    double eval_one(std::size_t j, double x) const;

    // The removed left-end hat g_0 (needed for initializer vertex masses).
    double left_hat(double x) const;

    // Lipschitz constant of hat j: the steeper of its two cell slopes.
    double hat_lipschitz(std::size_t j) const;

private:
    double clamp_domain(double x) const;

    Cover1D cover_;
};

// Integrals of every vertex hat (indices 0..m, including the removed g_0)
// against the marginal. These are the vertex masses consumed by the
// initializer; they sum to 1.
std::vector<double> vertex_masses(const Cover1D& cover, const Marginal1D& marginal);

// Greedy refinement: bisect, at each step, the cell with the largest
// width x mass score (ties resolved toward the lowest cell index) until the
// cover has target_cells cells. Output knots are a superset of the input.
Cover1D refine_greedy(const Cover1D& cover, const Marginal1D& marginal,
                      std::size_t target_cells);

// Certified 1-Wasserstein radius of the moment set induced by the hat basis:
// twice the mesh.
double radius_bound_w1(const Cover1D& cover);

// Diagnostic (unproven) mass-weighted radius estimate 2 * sum width_j*mass_j.
// Reported for context, never used in certificates.
double radius_mass_weighted(const Cover1D& cover, const Marginal1D& marginal);

// Number of best-of-call test functions guaranteeing W_p(mu, nu) <= eps over
// a hyperrectangle with the given side widths: prod_i (1 + ceil(2 w_i C m^{1/p} / eps)).
std::uint64_t hyperrect_basis_count(const std::vector<double>& box_widths, double p,
                                    double c_norm, double eps);

// Multi-dimensional best-of-call test functions over a product of uniform
// grids. Provided as an evaluable toolkit; the solver itself works with the
// one-dimensional hat bases above.
struct BestOfCallFn {
    enum class Kind { Call, Coordinate, PowerPut, PowerCall };
    Kind kind = Kind::Call;
    std::vector<int> dims;        // Call: participating dimensions
    std::vector<double> strikes;  // Call: strike per participating dimension
    std::vector<double> betas;    // Call: grid spacing per participating dimension
    int dim = 0;                  // Coordinate / Power*: the single dimension
    double strike = 0.0;          // Power*: the strike
    double p = 1.0;               // Power*: the exponent

    double eval(const std::vector<double>& x) const;
};

std::vector<BestOfCallFn> best_of_call_basis(const std::vector<std::vector<double>>& grids,
                                             double p);

}  // namespace mmot
