#include "mmot/cover.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mmot/errors.hpp"

namespace mmot {

Cover1D Cover1D::uniform(double lo, double hi, std::size_t cells) {
    if (!(hi > lo)) throw DomainError("cover: requires lo < hi");
    if (cells < 1) throw DomainError("cover: needs at least one cell");
    Cover1D c;
    c.knots.resize(cells + 1);
    for (std::size_t j = 0; j <= cells; ++j)
        c.knots[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(cells);
    c.knots.front() = lo;
    c.knots.back() = hi;
    return c;
}

Cover1D Cover1D::from_knots(std::vector<double> knots) {
    if (knots.size() < 2) throw DomainError("cover: needs at least two knots");
    for (std::size_t j = 0; j + 1 < knots.size(); ++j)
        if (!(knots[j] < knots[j + 1]))
            throw DomainError("cover: knots must be strictly increasing");
    Cover1D c;
    c.knots = std::move(knots);
    return c;
}

double Cover1D::mesh() const {
    double widest = 0.0;
    for (std::size_t j = 0; j + 1 < knots.size(); ++j)
        widest = std::max(widest, knots[j + 1] - knots[j]);
    return widest;
}

// ---------------------------------------------------------------------------
// TestBasis

TestBasis::TestBasis(Cover1D cover) : cover_(std::move(cover)) {
    if (cover_.knots.size() < 2) throw DomainError("basis: cover has no cells");
}

double TestBasis::clamp_domain(double x) const {
    const double lo = cover_.lo(), hi = cover_.hi();
    const double guard = 1e-9 * std::max({1.0, std::abs(lo), std::abs(hi)});
    if (x < lo - guard || x > hi + guard) {
        std::ostringstream msg;
        msg << "basis: x = " << x << " outside [" << lo << ", " << hi << "]";
        throw DomainError(msg.str());
    }
    return std::min(hi, std::max(lo, x));
}

int TestBasis::eval_sparse(double x, int index[2], double value[2]) const {
    x = clamp_domain(x);
    const auto& k = cover_.knots;
    const std::size_t m = cover_.cells();
    // Locate the cell [k_c, k_{c+1}] containing x.
    auto it = std::upper_bound(k.begin(), k.end(), x);
    std::size_t c = static_cast<std::size_t>(it - k.begin());
    c = c == 0 ? 0 : c - 1;
    if (c >= m) c = m - 1;
    const double t = (x - k[c]) / (k[c + 1] - k[c]);
    // Hats at the two cell knots; the one at knot 0 is not part of the basis,
    // so x = knot_0 yields the zero vector.
    int n = 0;
    if (c >= 1 && t < 1.0) {
        index[n] = static_cast<int>(c);
        value[n] = 1.0 - t;
        ++n;
    }
    if (t > 0.0) {
        index[n] = static_cast<int>(c + 1);
        value[n] = t;
        ++n;
    }
    return n;
}

std::vector<double> TestBasis::eval(double x) const {
    std::vector<double> out(size(), 0.0);
    int idx[2];
    double val[2];
    const int n = eval_sparse(x, idx, val);
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(idx[i] - 1)] = val[i];
    return out;
}

double TestBasis::eval_one(std::size_t j, double x) const {
    x = clamp_domain(x);
    const auto& k = cover_.knots;
    const std::size_t m = cover_.cells();
    if (j < 1 || j > m) throw DomainError("basis: hat index out of range");
    const double up = (x - k[j - 1]) / (k[j] - k[j - 1]);
    if (j == m) return std::min(1.0, std::max(0.0, up));
    const double down = (k[j + 1] - x) / (k[j + 1] - k[j]);
    return std::max(0.0, std::min(up, down));
}

double TestBasis::left_hat(double x) const {
    x = clamp_domain(x);
    const auto& k = cover_.knots;
    return std::max(0.0, (k[1] - x) / (k[1] - k[0]));
}

double TestBasis::hat_lipschitz(std::size_t j) const {
    const auto& k = cover_.knots;
    const std::size_t m = cover_.cells();
    if (j < 1 || j > m) throw DomainError("basis: hat index out of range");
    const double up = 1.0 / (k[j] - k[j - 1]);
    if (j == m) return up;
    return std::max(up, 1.0 / (k[j + 1] - k[j]));
}

// ---------------------------------------------------------------------------
// Cover utilities

std::vector<double> vertex_masses(const Cover1D& cover, const Marginal1D& marginal) {
    const std::size_t n = cover.knots.size();
    std::vector<double> masses(n, 0.0);
    std::vector<double> values(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        values[j] = 1.0;
        masses[j] = marginal.integrate_piecewise_linear(cover.knots, values);
        values[j] = 0.0;
    }
    return masses;
}

namespace {

double cell_mass(const Marginal1D& marginal, const std::vector<double>& knots,
                 std::size_t j) {
    // First cell counts everything up to its right knot so that a discrete
    // atom sitting exactly on the left support end is not lost.
    const double upper = marginal.cdf(knots[j + 1]);
    return j == 0 ? upper : upper - marginal.cdf(knots[j]);
}

}  // namespace

Cover1D refine_greedy(const Cover1D& cover, const Marginal1D& marginal,
                      std::size_t target_cells) {
    if (target_cells < cover.cells())
        throw DomainError("refine_greedy: target below current cell count");
    std::vector<double> knots = cover.knots;
    while (knots.size() - 1 < target_cells) {
        double best_score = -1.0;
        std::size_t best = 0;
        bool splittable = false;
        for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
            const double width = knots[j + 1] - knots[j];
            const double mid = 0.5 * (knots[j] + knots[j + 1]);
            if (!(mid > knots[j] && mid < knots[j + 1])) continue;  // fp-degenerate cell
            const double score = width * cell_mass(marginal, knots, j);
            if (score > best_score) {
                best_score = score;
                best = j;
                splittable = true;
            }
        }
        if (!splittable)
            throw NumericalError("refine_greedy: no cell can be split further");
        knots.insert(knots.begin() + static_cast<std::ptrdiff_t>(best) + 1,
                     0.5 * (knots[best] + knots[best + 1]));
    }
    Cover1D out;
    out.knots = std::move(knots);
    return out;
}

double radius_bound_w1(const Cover1D& cover) { return 2.0 * cover.mesh(); }

double radius_mass_weighted(const Cover1D& cover, const Marginal1D& marginal) {
    double total = 0.0;
    for (std::size_t j = 0; j + 1 < cover.knots.size(); ++j) {
        const double width = cover.knots[j + 1] - cover.knots[j];
        total += width * cell_mass(marginal, cover.knots, j);
    }
    return 2.0 * total;
}

std::uint64_t hyperrect_basis_count(const std::vector<double>& box_widths, double p,
                                    double c_norm, double eps) {
    if (!(eps > 0.0)) throw DomainError("hyperrect_basis_count: eps must be positive");
    if (!(p >= 1.0)) throw DomainError("hyperrect_basis_count: p must be >= 1");
    if (!(c_norm >= 1.0)) throw DomainError("hyperrect_basis_count: C_norm must be >= 1");
    if (box_widths.empty()) throw DomainError("hyperrect_basis_count: no dimensions");
    const double m = static_cast<double>(box_widths.size());
    std::uint64_t count = 1;
    for (double w : box_widths) {
        if (!(w > 0.0)) throw DomainError("hyperrect_basis_count: widths must be positive");
        const double n = std::ceil(2.0 * w * c_norm * std::pow(m, 1.0 / p) / eps);
        const std::uint64_t factor = 1 + static_cast<std::uint64_t>(n);
        std::uint64_t next = 0;
        if (__builtin_mul_overflow(count, factor, &next))
            throw BudgetError("hyperrect_basis_count: count overflows 64 bits");
        count = next;
    }
    return count;
}

// ---------------------------------------------------------------------------
// Best-of-call toolkit

double BestOfCallFn::eval(const std::vector<double>& x) const {
    switch (kind) {
        case Kind::Call: {
            double best = 0.0;
            for (std::size_t t = 0; t < dims.size(); ++t) {
                const double leg =
                    std::max(0.0, x[static_cast<std::size_t>(dims[t])] - strikes[t]) / betas[t];
                best = std::max(best, leg);
            }
            return best;
        }
        case Kind::Coordinate:
            return x[static_cast<std::size_t>(dim)];
        case Kind::PowerPut:
            return std::pow(std::max(0.0, strike - x[static_cast<std::size_t>(dim)]), p);
        case Kind::PowerCall:
            return std::pow(std::max(0.0, x[static_cast<std::size_t>(dim)] - strike), p);
    }
    return 0.0;
}

std::vector<BestOfCallFn> best_of_call_basis(const std::vector<std::vector<double>>& grids,
                                             double p) {
    const std::size_t m = grids.size();
    if (m == 0 || m > 20) throw DomainError("best_of_call_basis: 1..20 dimensions supported");
    if (!(p >= 1.0)) throw DomainError("best_of_call_basis: p must be >= 1");
    std::vector<double> betas(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto& g = grids[i];
        if (g.size() < 2)
            throw DomainError("best_of_call_basis: each grid needs at least two knots");
        const double beta = g[1] - g[0];
        if (!(beta > 0.0)) throw DomainError("best_of_call_basis: grids must increase");
        const double guard = 1e-9 * std::max(1.0, std::abs(g.back() - g.front()));
        for (std::size_t j = 0; j + 1 < g.size(); ++j)
            if (std::abs((g[j + 1] - g[j]) - beta) > guard)
                throw DomainError("best_of_call_basis: grid spacing must be uniform");
        betas[i] = beta;
    }

    // Count the call descriptors: every nonempty subset L of dimensions and
    // every strike choice j_i in 0..n_i for i in L.
    double projected = 1.0;
    for (const auto& g : grids) projected *= static_cast<double>(g.size() + 1);
    if (projected - 1.0 > 1e6)
        throw BudgetError("best_of_call_basis: descriptor count exceeds 1e6");

    std::vector<BestOfCallFn> out;
    const std::uint32_t subsets = (1u << m);
    for (std::uint32_t mask = 1; mask < subsets; ++mask) {
        std::vector<int> dims;
        for (std::size_t i = 0; i < m; ++i)
            if (mask & (1u << i)) dims.push_back(static_cast<int>(i));
        // Odometer over strike indices for the dimensions in this subset.
        std::vector<std::size_t> j(dims.size(), 0);
        while (true) {
            BestOfCallFn fn;
            fn.kind = BestOfCallFn::Kind::Call;
            fn.dims = dims;
            fn.strikes.resize(dims.size());
            fn.betas.resize(dims.size());
            for (std::size_t t = 0; t < dims.size(); ++t) {
                fn.strikes[t] = grids[static_cast<std::size_t>(dims[t])][j[t]];
                fn.betas[t] = betas[static_cast<std::size_t>(dims[t])];
            }
            out.push_back(std::move(fn));
            std::size_t carry = 0;
            while (carry < j.size()) {
                if (++j[carry] < grids[static_cast<std::size_t>(dims[carry])].size()) break;
                j[carry] = 0;
                ++carry;
            }
            if (carry == j.size()) break;
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        if (p == 1.0) {
            BestOfCallFn fn;
            fn.kind = BestOfCallFn::Kind::Coordinate;
            fn.dim = static_cast<int>(i);
            out.push_back(fn);
        } else {
            BestOfCallFn put;
            put.kind = BestOfCallFn::Kind::PowerPut;
            put.dim = static_cast<int>(i);
            put.strike = grids[i].front();
            put.p = p;
            out.push_back(put);
            BestOfCallFn call;
            call.kind = BestOfCallFn::Kind::PowerCall;
            call.dim = static_cast<int>(i);
            call.strike = grids[i].back();
            call.p = p;
            out.push_back(call);
        }
    }
    return out;
}

}  // namespace mmot
