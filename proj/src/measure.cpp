#include "mmot/measure.hpp"

#include <cmath>

#include "mmot/errors.hpp"

namespace mmot {

void DiscreteMeasure::validate(double tol) const {
    if (points.size() != weights.size())
        throw DomainError("measure: point and weight counts differ");
    if (weights.empty()) throw DomainError("measure: empty support");
    const std::size_t d = points.front().size();
    double sum = 0.0;
    for (double w : weights) {
        if (!(w > 0.0)) throw DomainError("measure: weights must be positive");
        sum += w;
    }
    for (const auto& p : points)
        if (p.size() != d) throw DomainError("measure: inconsistent point dimension");
    if (std::abs(sum - 1.0) > tol) throw DomainError("measure: weights must sum to 1");
}

}  // namespace mmot
