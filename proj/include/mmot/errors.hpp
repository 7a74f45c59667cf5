#pragma once

#include <stdexcept>
#include <string>

namespace mmot {

// Input outside a documented domain: bad weights, knots not covering a
// support, evaluation outside the box, malformed descriptors.
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// A numeric routine could not reach its accuracy contract (simplex residuals
// after refactorization, cut dedup stalls).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// A work cap was exceeded (grid oracle point cap, node caps).
class BudgetError : public std::runtime_error {
public:
    explicit BudgetError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mmot
