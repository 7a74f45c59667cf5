#include "mmot/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mmot/errors.hpp"

namespace mmot {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr int kQuantileTableSize = 1025;

// Value of the piecewise-linear interpolant through (knots, values) at x,
// with x assumed inside [knots.front(), knots.back()].
double eval_pwl(const std::vector<double>& knots, const std::vector<double>& values,
                double x) {
    if (x <= knots.front()) return values.front();
    if (x >= knots.back()) return values.back();
    const auto it = std::upper_bound(knots.begin(), knots.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - knots.begin()) - 1;
    const double t = (x - knots[j]) / (knots[j + 1] - knots[j]);
    return values[j] + t * (values[j + 1] - values[j]);
}

void check_weights(const std::vector<double>& weights, const char* who) {
    if (weights.empty()) throw DomainError(std::string(who) + ": no components");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w > 0.0)) throw DomainError(std::string(who) + ": weights must be positive");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw DomainError(std::string(who) + ": weights must sum to 1");
}

// Antiderivative of the standard normal cdf: Psi'(z) = Phi(z).
double normal_cdf_antiderivative(double z) {
    return z * std_normal_cdf(z) + std_normal_pdf(z);
}

}  // namespace

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

double std_normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

// ---------------------------------------------------------------------------
// TruncatedGaussianMixture

double TruncatedGaussianMixture::cdf(double x) const {
    if (x <= lo) return 0.0;
    if (x >= hi) return 1.0;
    double total = 0.0;
    for (std::size_t c = 0; c < weights.size(); ++c) {
        const double z = (x - means[c]) / stds[c];
        const double alpha = (lo - means[c]) / stds[c];
        // Upper-tail complements keep the difference accurate in both tails.
        const double d = 0.5 * (std::erfc(alpha * kInvSqrt2) - std::erfc(z * kInvSqrt2));
        total += weights[c] * d / comp_mass[c];
    }
    return std::min(1.0, std::max(0.0, total));
}

double TruncatedGaussianMixture::pdf(double x) const {
    if (x < lo || x > hi) return 0.0;
    double d = 0.0;
    for (std::size_t c = 0; c < weights.size(); ++c) {
        const double z = (x - means[c]) / stds[c];
        d += weights[c] * std_normal_pdf(z) / (stds[c] * comp_mass[c]);
    }
    return d;
}

double TruncatedGaussianMixture::quantile(double u) const {
    if (u <= 0.0) return lo;
    if (u >= 1.0) return hi;
    // Bracket from the precomputed table, then safeguarded Newton. The
    // bracket invariant is cdf(a) < u <= cdf(b); bisection steps keep it, so
    // the result is the generalized inverse even across zero-density gaps
    // between mixture components.
    const auto it = std::lower_bound(table_f.begin(), table_f.end(), u);
    std::size_t idx = static_cast<std::size_t>(it - table_f.begin());
    if (idx == 0) idx = 1;
    if (idx >= table_x.size()) idx = table_x.size() - 1;
    double a = table_x[idx - 1];
    double b = table_x[idx];
    const double tol = 1e-13 * std::max({1.0, std::abs(lo), std::abs(hi)});
    double x = 0.5 * (a + b);
    for (int iter = 0; iter < 200 && b - a > tol; ++iter) {
        const double g = cdf(x) - u;
        if (g >= 0.0)
            b = x;
        else
            a = x;
        const double d = pdf(x);
        double next = d > 1e-300 ? x - g / d : a;
        if (!(next > a && next < b)) next = 0.5 * (a + b);
        x = next;
    }
    return b;
}

double TruncatedGaussianMixture::affine_integral(double x0, double x1, double a,
                                                 double b) const {
    x0 = std::max(x0, lo);
    x1 = std::min(x1, hi);
    if (!(x1 > x0)) return 0.0;
    double total = 0.0;
    for (std::size_t c = 0; c < weights.size(); ++c) {
        const double m = means[c], s = stds[c];
        const double z0 = (x0 - m) / s, z1 = (x1 - m) / s;
        // Difference of upper-tail complements avoids cancellation when both
        // endpoints sit in the right tail.
        const double dphi_cdf = 0.5 * (std::erfc(z0 * kInvSqrt2) - std::erfc(z1 * kInvSqrt2));
        const double dphi_pdf = std_normal_pdf(z1) - std_normal_pdf(z0);
        const double mass = weights[c] / comp_mass[c] * dphi_cdf;
        const double first_moment = weights[c] / comp_mass[c] * (m * dphi_cdf - s * dphi_pdf);
        total += a * mass + b * first_moment;
    }
    return total;
}

double TruncatedGaussianMixture::cdf_integral(double x0, double x1) const {
    if (!(x1 > x0)) return 0.0;
    double total = std::max(0.0, x1 - std::max(x0, hi));  // region where cdf = 1
    const double a = std::max(x0, lo);
    const double b = std::min(x1, hi);
    if (b > a) {
        for (std::size_t c = 0; c < weights.size(); ++c) {
            const double m = means[c], s = stds[c];
            const double za = (a - m) / s, zb = (b - m) / s;
            const double core =
                s * (normal_cdf_antiderivative(zb) - normal_cdf_antiderivative(za));
            total += weights[c] / comp_mass[c] * (core - comp_phi_alpha[c] * (b - a));
        }
    }
    return total;
}

// ---------------------------------------------------------------------------
// UniformLaw

double UniformLaw::cdf(double x) const {
    if (x <= a) return 0.0;
    if (x >= b) return 1.0;
    return (x - a) / (b - a);
}

double UniformLaw::quantile(double u) const { return a + u * (b - a); }

double UniformLaw::affine_integral(double x0, double x1, double ca, double cb) const {
    x0 = std::max(x0, a);
    x1 = std::min(x1, b);
    if (!(x1 > x0)) return 0.0;
    return (ca * (x1 - x0) + 0.5 * cb * (x1 * x1 - x0 * x0)) / (b - a);
}

double UniformLaw::cdf_integral(double x0, double x1) const {
    if (!(x1 > x0)) return 0.0;
    double total = std::max(0.0, x1 - std::max(x0, b));
    const double u = std::max(x0, a);
    const double v = std::min(x1, b);
    if (v > u) total += ((v - a) * (v - a) - (u - a) * (u - a)) / (2.0 * (b - a));
    return total;
}

// ---------------------------------------------------------------------------
// DiscreteLaw

double DiscreteLaw::cdf(double x) const {
    // Mass of atoms <= x; upper_bound gives the count of such atoms.
    const auto it = std::upper_bound(atoms.begin(), atoms.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - atoms.begin());
    if (k == 0) return 0.0;
    if (k == atoms.size()) return 1.0;
    return cumulative[k - 1];
}

double DiscreteLaw::quantile(double u) const {
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) return atoms.back();
    return atoms[static_cast<std::size_t>(it - cumulative.begin())];
}

double DiscreteLaw::cdf_integral(double x0, double x1) const {
    if (!(x1 > x0)) return 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
        const double from = std::max(x0, atoms[k]);
        if (from < x1) total += weights[k] * (x1 - from);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Marginal1D

Marginal1D Marginal1D::truncated_gaussian_mixture(std::vector<double> weights,
                                                  std::vector<double> means,
                                                  std::vector<double> stds, double lo,
                                                  double hi) {
    check_weights(weights, "truncated_gaussian_mixture");
    if (means.size() != weights.size() || stds.size() != weights.size())
        throw DomainError("truncated_gaussian_mixture: component arrays differ in length");
    if (!(hi > lo)) throw DomainError("truncated_gaussian_mixture: empty support interval");
    TruncatedGaussianMixture g;
    g.weights = std::move(weights);
    g.means = std::move(means);
    g.stds = std::move(stds);
    g.lo = lo;
    g.hi = hi;
    g.comp_phi_alpha.resize(g.weights.size());
    g.comp_mass.resize(g.weights.size());
    for (std::size_t c = 0; c < g.weights.size(); ++c) {
        if (!(g.stds[c] > 0.0))
            throw DomainError("truncated_gaussian_mixture: stds must be positive");
        const double alpha = (lo - g.means[c]) / g.stds[c];
        const double beta = (hi - g.means[c]) / g.stds[c];
        g.comp_phi_alpha[c] = std_normal_cdf(alpha);
        g.comp_mass[c] = 0.5 * (std::erfc(alpha * kInvSqrt2) - std::erfc(beta * kInvSqrt2));
        if (!(g.comp_mass[c] > 1e-12))
            throw DomainError("truncated_gaussian_mixture: component has no mass on support");
    }
    g.table_x.resize(kQuantileTableSize);
    g.table_f.resize(kQuantileTableSize);
    Marginal1D out{decltype(law_)(std::move(g))};
    auto& built = std::get<TruncatedGaussianMixture>(out.law_);
    for (int k = 0; k < kQuantileTableSize; ++k) {
        const double x = lo + (hi - lo) * k / (kQuantileTableSize - 1);
        built.table_x[static_cast<std::size_t>(k)] = x;
        built.table_f[static_cast<std::size_t>(k)] = built.cdf(x);
    }
    return out;
}

Marginal1D Marginal1D::uniform(double a, double b) {
    if (!(b > a)) throw DomainError("uniform: requires a < b");
    return Marginal1D{decltype(law_)(UniformLaw{a, b})};
}

Marginal1D Marginal1D::discrete(std::vector<double> atoms, std::vector<double> weights) {
    if (atoms.empty() || atoms.size() != weights.size())
        throw DomainError("discrete: atoms and weights must be non-empty and equal length");
    std::vector<std::size_t> order(atoms.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](std::size_t l, std::size_t r) { return atoms[l] < atoms[r]; });
    DiscreteLaw d;
    for (std::size_t k : order) {
        if (!(weights[k] > 0.0)) throw DomainError("discrete: weights must be positive");
        if (!d.atoms.empty() && atoms[k] == d.atoms.back()) {
            d.weights.back() += weights[k];  // merge duplicate atoms
        } else {
            d.atoms.push_back(atoms[k]);
            d.weights.push_back(weights[k]);
        }
    }
    double sum = 0.0;
    for (double w : d.weights) sum += w;
    if (std::abs(sum - 1.0) > 1e-9) throw DomainError("discrete: weights must sum to 1");
    d.cumulative.resize(d.weights.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < d.weights.size(); ++k) {
        acc += d.weights[k];
        d.cumulative[k] = acc;
    }
    d.cumulative.back() = 1.0;
    return Marginal1D{decltype(law_)(std::move(d))};
}

Marginal1D Marginal1D::parse(const Json& descriptor) {
    if (!descriptor.is_object() || !descriptor.contains("type"))
        throw DomainError("marginal descriptor: missing \"type\"");
    const std::string type = descriptor.at("type").get<std::string>();
    try {
        if (type == "tgm") {
            const auto support = descriptor.at("support").get<std::vector<double>>();
            if (support.size() != 2)
                throw DomainError("marginal descriptor: \"support\" must be [lo, hi]");
            return truncated_gaussian_mixture(
                descriptor.at("weights").get<std::vector<double>>(),
                descriptor.at("means").get<std::vector<double>>(),
                descriptor.at("stds").get<std::vector<double>>(), support[0], support[1]);
        }
        if (type == "uniform")
            return uniform(descriptor.at("a").get<double>(), descriptor.at("b").get<double>());
        if (type == "discrete")
            return discrete(descriptor.at("atoms").get<std::vector<double>>(),
                            descriptor.at("weights").get<std::vector<double>>());
    } catch (const Json::exception& e) {
        throw DomainError(std::string("marginal descriptor: ") + e.what());
    }
    throw DomainError("marginal descriptor: unknown type \"" + type + "\"");
}

Json Marginal1D::serialize() const {
    Json out;
    if (const auto* g = std::get_if<TruncatedGaussianMixture>(&law_)) {
        out["type"] = "tgm";
        out["weights"] = g->weights;
        out["means"] = g->means;
        out["stds"] = g->stds;
        out["support"] = std::vector<double>{g->lo, g->hi};
    } else if (const auto* u = std::get_if<UniformLaw>(&law_)) {
        out["type"] = "uniform";
        out["a"] = u->a;
        out["b"] = u->b;
    } else {
        const auto& d = std::get<DiscreteLaw>(law_);
        out["type"] = "discrete";
        out["atoms"] = d.atoms;
        out["weights"] = d.weights;
    }
    return out;
}

double Marginal1D::cdf(double x) const {
    return std::visit([&](const auto& law) { return law.cdf(x); }, law_);
}

double Marginal1D::quantile(double u) const {
    if (!(u >= 0.0 && u <= 1.0)) {
        std::ostringstream msg;
        msg << "quantile: u = " << u << " outside [0, 1]";
        throw DomainError(msg.str());
    }
    return std::visit([&](const auto& law) { return law.quantile(u); }, law_);
}

double Marginal1D::integrate_piecewise_linear(const std::vector<double>& knots,
                                              const std::vector<double>& values) const {
    if (knots.size() < 2 || knots.size() != values.size())
        throw DomainError("integrate_piecewise_linear: need matching knots/values, >= 2");
    for (std::size_t j = 0; j + 1 < knots.size(); ++j)
        if (!(knots[j] < knots[j + 1]))
            throw DomainError("integrate_piecewise_linear: knots must be strictly increasing");
    if (knots.front() > support_lo() + 1e-12 || knots.back() < support_hi() - 1e-12)
        throw DomainError("integrate_piecewise_linear: knots do not cover the support");

    if (const auto* d = std::get_if<DiscreteLaw>(&law_)) {
        double total = 0.0;
        for (std::size_t k = 0; k < d->atoms.size(); ++k)
            total += d->weights[k] * eval_pwl(knots, values, d->atoms[k]);
        return total;
    }
    double total = 0.0;
    for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
        const double slope = (values[j + 1] - values[j]) / (knots[j + 1] - knots[j]);
        const double intercept = values[j] - slope * knots[j];
        if (const auto* g = std::get_if<TruncatedGaussianMixture>(&law_))
            total += g->affine_integral(knots[j], knots[j + 1], intercept, slope);
        else
            total += std::get<UniformLaw>(law_).affine_integral(knots[j], knots[j + 1],
                                                                intercept, slope);
    }
    return total;
}

double Marginal1D::cdf_integral(double x0, double x1) const {
    return std::visit([&](const auto& law) { return law.cdf_integral(x0, x1); }, law_);
}

double Marginal1D::sample(Rng& rng) const { return quantile(rng.uniform()); }

double Marginal1D::support_lo() const {
    return std::visit(
        [](const auto& law) -> double {
            using T = std::decay_t<decltype(law)>;
            if constexpr (std::is_same_v<T, TruncatedGaussianMixture>)
                return law.lo;
            else if constexpr (std::is_same_v<T, UniformLaw>)
                return law.a;
            else
                return law.atoms.front();
        },
        law_);
}

double Marginal1D::support_hi() const {
    return std::visit(
        [](const auto& law) -> double {
            using T = std::decay_t<decltype(law)>;
            if constexpr (std::is_same_v<T, TruncatedGaussianMixture>)
                return law.hi;
            else if constexpr (std::is_same_v<T, UniformLaw>)
                return law.b;
            else
                return law.atoms.back();
        },
        law_);
}

}  // namespace mmot
