#pragma once

#include <vector>

namespace mmot {

// Finitely supported probability measure on a product box: support points
// with strictly positive weights summing to 1.
struct DiscreteMeasure {
    std::vector<std::vector<double>> points;
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
    std::size_t dims() const { return points.empty() ? 0 : points.front().size(); }

    // Throws DomainError unless weights are positive, sum to 1 within tol,
    // and every point has the same dimension.
    void validate(double tol = 1e-12) const;
};

}  // namespace mmot
