#include "mmot/reassembly.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include "mmot/errors.hpp"

namespace mmot {

namespace {

// Sorted projection of the atoms onto coordinate i with exact duplicates
// merged: per original atom k, the (lo, hi] quantile interval of its group.
void projection_intervals(const DiscreteMeasure& mu, std::size_t i, std::vector<double>& lo,
                          std::vector<double>& hi) {
    const std::size_t k_count = mu.size();
    std::vector<std::size_t> order(k_count);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return mu.points[a][i] < mu.points[b][i];
    });

    lo.assign(k_count, 0.0);
    hi.assign(k_count, 0.0);
    double cum = 0.0;
    std::size_t g = 0;
    while (g < k_count) {
        std::size_t e = g;
        double mass = 0.0;
        while (e < k_count && mu.points[order[e]][i] == mu.points[order[g]][i]) {
            mass += mu.weights[order[e]];
            ++e;
        }
        const double start = cum;
        cum = (e == k_count) ? 1.0 : cum + mass;
        for (std::size_t t = g; t < e; ++t) {
            lo[order[t]] = start;
            hi[order[t]] = cum;
        }
        g = e;
    }
}

}  // namespace

void project_measure(const DiscreteMeasure& mu, std::size_t i, std::vector<double>& atoms,
                     std::vector<double>& weights) {
    if (i >= mu.dims()) throw DomainError("projection: coordinate out of range");
    std::vector<std::size_t> order(mu.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return mu.points[a][i] < mu.points[b][i];
    });
    atoms.clear();
    weights.clear();
    for (std::size_t t = 0; t < order.size(); ++t) {
        const double v = mu.points[order[t]][i];
        if (atoms.empty() || v != atoms.back()) {
            atoms.push_back(v);
            weights.push_back(0.0);
        }
        weights.back() += mu.weights[order[t]];
    }
}

void CouplingSampler::sample(Rng& rng, std::vector<double>& x, std::vector<double>& y) const {
    const auto it = std::upper_bound(atom_cum.begin(), atom_cum.end(), rng.uniform());
    const std::size_t k = static_cast<std::size_t>(it - atom_cum.begin());
    x = mu.points[k];
    y.resize(dims());
    for (std::size_t i = 0; i < dims(); ++i) {
        // uniform() is in [0, 1), so u lands in (lo, hi]; at a cdf jump the
        // right-closed interval keeps the quantile on the group's own atoms.
        const double u = q_hi[i][k] - rng.uniform() * (q_hi[i][k] - q_lo[i][k]);
        y[i] = marginals[i].quantile(u);
    }
}

CouplingSampler build_sampler(const DiscreteMeasure& mu,
                              const std::vector<Marginal1D>& marginals) {
    mu.validate(1e-9);
    if (mu.dims() != marginals.size())
        throw DomainError("sampler: measure and marginal dimensions differ");

    CouplingSampler s;
    s.mu = mu;
    s.marginals = marginals;
    s.atom_cum.resize(mu.size());
    double cum = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
        cum += mu.weights[k];
        s.atom_cum[k] = cum;
    }
    s.atom_cum.back() = 1.0;

    s.q_lo.resize(marginals.size());
    s.q_hi.resize(marginals.size());
    for (std::size_t i = 0; i < marginals.size(); ++i)
        projection_intervals(mu, i, s.q_lo[i], s.q_hi[i]);
    return s;
}

double w1_discrete_vs_marginal(const std::vector<double>& atoms,
                               const std::vector<double>& weights, const Marginal1D& m) {
    if (atoms.empty() || atoms.size() != weights.size())
        throw DomainError("w1: need one weight per atom");
    double wsum = 0.0;
    for (std::size_t j = 0; j < atoms.size(); ++j) {
        if (j > 0 && atoms[j] < atoms[j - 1]) throw DomainError("w1: atoms must be sorted");
        if (!(weights[j] > 0.0)) throw DomainError("w1: weights must be positive");
        wsum += weights[j];
    }
    if (std::abs(wsum - 1.0) > 1e-9) throw DomainError("w1: weights must sum to 1");

    // Between consecutive atoms the discrete cdf is a constant level c, so
    // each segment needs only the marginal's cdf integral and the single
    // crossing point quantile(c).
    const double lo = std::min(atoms.front(), m.support_lo());
    const double hi = std::max(atoms.back(), m.support_hi());
    double total = 0.0;
    double level = 0.0;
    double a = lo;
    for (std::size_t j = 0; j <= atoms.size(); ++j) {
        const double b = (j < atoms.size()) ? atoms[j] : hi;
        if (b > a) {
            const double width = b - a;
            if (m.cdf(a) >= level) {
                total += m.cdf_integral(a, b) - level * width;
            } else if (m.cdf(b) <= level) {
                total += level * width - m.cdf_integral(a, b);
            } else {
                const double split = std::min(std::max(m.quantile(level), a), b);
                total += level * (split - a) - m.cdf_integral(a, split);
                total += m.cdf_integral(split, b) - level * (b - split);
            }
        }
        if (j < atoms.size()) {
            level += weights[j] / wsum;
            a = std::max(a, atoms[j]);
        }
    }
    // Each segment is nonnegative up to rounding; never report a negative
    // distance.
    return std::max(total, 0.0);
}

MCEstimate estimate_upper_bound(const CPWACost& f, const CouplingSampler& s, long n,
                                long reps, std::uint64_t seed, unsigned threads) {
    if (n < 1 || reps < 1) throw DomainError("upper bound: need n >= 1 and reps >= 1");

    std::vector<double> rep_mean(static_cast<std::size_t>(reps));
    auto run_rep = [&](long r) {
        Rng rng = Rng::stream(seed, 3, static_cast<std::uint64_t>(r));
        std::vector<double> x, y;
        double sum = 0.0;
        for (long t = 0; t < n; ++t) {
            s.sample(rng, x, y);
            sum += f.eval(y);
        }
        rep_mean[static_cast<std::size_t>(r)] = sum / static_cast<double>(n);
    };

    if (threads <= 1 || reps == 1) {
        for (long r = 0; r < reps; ++r) run_rep(r);
    } else {
        // Striped assignment: replication r always runs stream r, so the
        // result is identical for any worker count.
        const unsigned t_count = std::min<unsigned>(threads, static_cast<unsigned>(reps));
        std::vector<std::thread> pool;
        pool.reserve(t_count);
        for (unsigned t = 0; t < t_count; ++t) {
            pool.emplace_back([&, t]() {
                for (long r = static_cast<long>(t); r < reps; r += t_count) run_rep(r);
            });
        }
        for (auto& th : pool) th.join();
    }

    MCEstimate est;
    est.reps = reps;
    est.n = n;
    double sum = 0.0;
    for (double v : rep_mean) sum += v;
    est.mean = sum / static_cast<double>(reps);
    if (reps > 1) {
        double ss = 0.0;
        for (double v : rep_mean) ss += (v - est.mean) * (v - est.mean);
        est.std_error = std::sqrt(ss / static_cast<double>(reps - 1) / static_cast<double>(reps));
    }
    est.ci_lo = est.mean - 1.96 * est.std_error;
    est.ci_hi = est.mean + 1.96 * est.std_error;
    return est;
}

DiscreteMeasure reassemble_discrete_exact(const DiscreteMeasure& mu,
                                          const std::vector<Marginal1D>& marginals) {
    mu.validate(1e-9);
    const std::size_t n = marginals.size();
    if (mu.dims() != n) throw DomainError("exact reassembly: dimensions differ");
    for (const auto& m : marginals) {
        if (!m.is_discrete())
            throw DomainError("exact reassembly: every marginal must be discrete");
    }

    std::vector<std::vector<double>> lo(n), hi(n);
    for (std::size_t i = 0; i < n; ++i) projection_intervals(mu, i, lo[i], hi[i]);

    // Marginal cumulative intervals (C_{j-1}, C_j], last pinned to 1.
    std::vector<std::vector<double>> cum(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& law = marginals[i].as_discrete();
        double c = 0.0;
        for (std::size_t j = 0; j < law.weights.size(); ++j) {
            c += law.weights[j];
            cum[i].push_back(c);
        }
        cum[i].back() = 1.0;
    }

    std::map<std::vector<double>, double> out;
    std::vector<std::pair<double, double>> cond;  // (value, conditional mass) per dim
    for (std::size_t k = 0; k < mu.size(); ++k) {
        // Conditional of Y_i given atom k: marginal atoms hit by the group
        // interval, with masses equal to the overlap over the group length.
        std::vector<std::vector<std::pair<double, double>>> parts(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& law = marginals[i].as_discrete();
            const double len = hi[i][k] - lo[i][k];
            double prev = 0.0;
            for (std::size_t j = 0; j < law.atoms.size(); ++j) {
                const double overlap =
                    std::min(hi[i][k], cum[i][j]) - std::max(lo[i][k], prev);
                if (overlap > 0.0) parts[i].push_back({law.atoms[j], overlap / len});
                prev = cum[i][j];
            }
        }
        // Product over dimensions, depth-first.
        std::vector<std::size_t> pick(n, 0);
        std::vector<double> point(n);
        std::size_t d = 0;
        double mass = mu.weights[k];
        std::vector<double> stack_mass(n + 1);
        stack_mass[0] = mass;
        while (true) {
            if (d == n) {
                out[point] += stack_mass[n];
                --d;
                ++pick[d];
            } else if (pick[d] < parts[d].size()) {
                point[d] = parts[d][pick[d]].first;
                stack_mass[d + 1] = stack_mass[d] * parts[d][pick[d]].second;
                ++d;
            } else {
                if (d == 0) break;
                pick[d] = 0;
                --d;
                ++pick[d];
            }
        }
    }

    DiscreteMeasure res;
    double total = 0.0;
    for (const auto& [pt, w] : out) {
        if (w > 0.0) {
            res.points.push_back(pt);
            res.weights.push_back(w);
            total += w;
        }
    }
    for (double& w : res.weights) w /= total;
    res.validate();
    return res;
}

}  // namespace mmot
