#pragma once

#include <cstdint>
#include <vector>

#include "mmot/json.hpp"
#include "mmot/rng.hpp"

namespace mmot {

// Axis-aligned box, the ambient domain of a cost function.
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    std::size_t dims() const { return lo.size(); }
    bool contains(const std::vector<double>& x, double guard = 1e-9) const;
};

struct AffinePiece {
    std::vector<double> a;
    double b = 0.0;
};

// Continuous piecewise-affine cost in difference-of-max form:
//   f(x) = sum_k max_i (<a+_{k,i}, x> + b+_{k,i})  -  sum_k max_i (<a-_{k,i}, x> + b-_{k,i}).
struct CPWACost {
    std::vector<std::vector<AffinePiece>> pos_blocks;
    std::vector<std::vector<AffinePiece>> neg_blocks;
    Box box;

    // Value at x. Throws DomainError when x leaves the box by more than a
    // 1e-9 relative guard.
    double eval(const std::vector<double>& x) const;

    // Adds the constant c to the function (absorbed into the first positive
    // block, or a fresh constant block when there is none).
    void shift(double c);

    // Conservative upper bound on max f over the box: the positive blocks'
    // box maxima minus, per negative block, the largest box minimum among
    // its pieces.
    double box_upper_bound() const;

    static CPWACost parse(const Json& descriptor, Box box);
    Json serialize() const;  // blocks only; the box travels with the config
};

struct LipschitzInfo {
    double l_f = 0.0;  // valid constant for the l1 product metric
    std::vector<double> pos_contributions;
    std::vector<double> neg_contributions;
};

// Block-sum Lipschitz bound: sum over blocks of the largest piece inf-norm.
// Conservative; a larger constant only loosens error budgets downstream.
LipschitzInfo lipschitz_l1(const CPWACost& f);

// Closed-form max over the box of <a, x> + b (coordinatewise sign split).
double box_max_linear(const std::vector<double>& a, double b, const Box& box);
double box_min_linear(const std::vector<double>& a, double b, const Box& box);

// Random instance in the absolute-value form sum_k |<s+_k, x> - t+_k| -
// sum_k |<s-_k, x> - t-_k| with each s uniform on the unit sphere (Gaussian
// normalization) and t uniform on [t_lo, t_hi]. Deterministic in the seed.
CPWACost random_instance(std::size_t n, std::size_t k_pos, std::size_t k_neg,
                         std::uint64_t seed, Box box, double t_lo = -5.0,
                         double t_hi = 5.0);

}  // namespace mmot
