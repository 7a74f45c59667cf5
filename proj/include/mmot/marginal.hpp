#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "mmot/json.hpp"
#include "mmot/rng.hpp"

namespace mmot {

// One-dimensional probability laws on a compact interval. Three families are
// supported: mixtures of truncated Gaussians, uniform laws, and finitely
// supported (discrete) laws. All evaluation paths are closed-form; there is
// no quadrature anywhere in this module.

struct TruncatedGaussianMixture {
    std::vector<double> weights;  // positive, sum to 1
    std::vector<double> means;    // pre-truncation component means
    std::vector<double> stds;     // pre-truncation component stds, > 0
    double lo = 0.0;              // support interval
    double hi = 0.0;

    // Precomputed at construction.
    std::vector<double> comp_phi_alpha;  // Phi((lo - mean)/std) per component
    std::vector<double> comp_mass;       // Phi(beta) - Phi(alpha) per component, > 0
    std::vector<double> table_x;         // monotone cdf table for quantile bracketing
    std::vector<double> table_f;

    double cdf(double x) const;
    double pdf(double x) const;
    double quantile(double u) const;
    // Integral of (a + b*x) against the law restricted to [x0, x1].
    double affine_integral(double x0, double x1, double a, double b) const;
    // Integral of the cdf over [x0, x1].
    double cdf_integral(double x0, double x1) const;
};

struct UniformLaw {
    double a = 0.0;
    double b = 1.0;

    double cdf(double x) const;
    double quantile(double u) const;
    double affine_integral(double x0, double x1, double ca, double cb) const;
    double cdf_integral(double x0, double x1) const;
};

struct DiscreteLaw {
    std::vector<double> atoms;    // strictly increasing after construction
    std::vector<double> weights;  // positive, sum to 1
    std::vector<double> cumulative;

    double cdf(double x) const;
    double quantile(double u) const;
    double cdf_integral(double x0, double x1) const;
};

class Marginal1D {
public:
    // Validating factories. Each throws DomainError on malformed input
    // (nonpositive weights/stds, weight sum off by more than 1e-9, empty
    // support, a component with no mass on the support interval).
    static Marginal1D truncated_gaussian_mixture(std::vector<double> weights,
                                                 std::vector<double> means,
                                                 std::vector<double> stds,
                                                 double lo, double hi);
    static Marginal1D uniform(double a, double b);
    static Marginal1D discrete(std::vector<double> atoms, std::vector<double> weights);

    // Descriptor round-trip. parse(serialize(m)) reproduces m exactly.
    static Marginal1D parse(const Json& descriptor);
    Json serialize() const;

    // Right-continuous distribution function; 0 below the support, 1 at and
    // above its upper end.
    double cdf(double x) const;

    // Generalized inverse inf{x : cdf(x) >= u}. Throws DomainError for
    // u outside [0, 1]. At a cdf jump this lands on the atom carrying the
    // jump; quantile(0) is the lower support end.
    double quantile(double u) const;

    // Exact integral of the piecewise-linear interpolant through
    // (knots[j], values[j]) against the law. The knots must be strictly
    // increasing and cover the support interval (DomainError otherwise).
    double integrate_piecewise_linear(const std::vector<double>& knots,
                                      const std::vector<double>& values) const;

    // Integral of the cdf over [x0, x1] in closed form. Support routine for
    // exact 1-Wasserstein distances between a discrete law and this one.
    double cdf_integral(double x0, double x1) const;

    // One draw by inversion: quantile(U) with U uniform on [0, 1).
    double sample(Rng& rng) const;

    double support_lo() const;
    double support_hi() const;

    bool is_discrete() const { return std::holds_alternative<DiscreteLaw>(law_); }
    const DiscreteLaw& as_discrete() const { return std::get<DiscreteLaw>(law_); }

    const std::variant<TruncatedGaussianMixture, UniformLaw, DiscreteLaw>& law() const {
        return law_;
    }

private:
    explicit Marginal1D(std::variant<TruncatedGaussianMixture, UniformLaw, DiscreteLaw> law)
        : law_(std::move(law)) {}

    std::variant<TruncatedGaussianMixture, UniformLaw, DiscreteLaw> law_;
};

// Standard normal helpers shared with tests.
double std_normal_cdf(double z);
double std_normal_pdf(double z);

}  // namespace mmot
