#include "mmot/cutting_plane.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "mmot/errors.hpp"
#include "mmot/lp.hpp"

namespace mmot {

namespace {

bool close_linf(const std::vector<double>& a, const std::vector<double>& b, double tol) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::abs(a[i] - b[i]) > tol) return false;
    }
    return true;
}

}  // namespace

InitResult init_algorithm0(const std::vector<std::vector<double>>& vertex_masses,
                           const std::vector<std::vector<double>>& vertices) {
    const std::size_t n = vertex_masses.size();
    if (n == 0) throw DomainError("initial coupling: no marginals");
    if (vertices.size() != n)
        throw DomainError("initial coupling: mass and vertex list counts differ");

    std::vector<std::vector<double>> mass(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t sz = vertex_masses[i].size();
        if (sz < 2 || vertices[i].size() != sz)
            throw DomainError("initial coupling: each marginal needs one mass per vertex");
        double sum = 0.0;
        for (double q : vertex_masses[i]) {
            if (!(q > 0.0))
                throw DomainError("initial coupling: vertex masses must be positive");
            sum += q;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw DomainError("initial coupling: vertex masses must sum to 1");
        mass[i] = vertex_masses[i];
        for (double& q : mass[i]) q /= sum;
    }

    InitResult out;
    std::vector<std::size_t> at(n, 0);  // current vertex index per marginal
    std::vector<double> rem(n);         // mass left at the current vertex
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        rem[i] = mass[i][0];
        total += mass[i].size();
    }

    for (std::size_t guard = 0; guard < total + n + 4; ++guard) {
        // A marginal is live while it still has mass at its vertex; all
        // marginals consume mass at the same rate, so they finish together up
        // to rounding.
        double w = std::numeric_limits<double>::infinity();
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (rem[i] > 0.0) {
                any = true;
                w = std::min(w, rem[i]);
            }
        }
        if (!any) break;

        std::vector<double> point(n);
        for (std::size_t i = 0; i < n; ++i) point[i] = vertices[i][at[i]];
        out.measure.points.push_back(std::move(point));
        out.measure.weights.push_back(w);

        // Subtract the emitted weight; absorb sub-1e-15 residue left by the
        // normalization so stragglers cannot spawn phantom atoms.
        std::vector<std::size_t> hit;
        for (std::size_t i = 0; i < n; ++i) {
            if (rem[i] <= 0.0) continue;
            rem[i] -= w;
            if (rem[i] <= 1e-15) {
                rem[i] = 0.0;
                hit.push_back(i);
            }
        }

        bool can_advance = false;
        for (std::size_t i : hit) {
            if (at[i] + 1 < mass[i].size()) can_advance = true;
        }
        if (hit.size() > 1 && can_advance) out.flag = 1;

        for (std::size_t i : hit) {
            if (at[i] + 1 < mass[i].size()) {
                ++at[i];
                rem[i] = mass[i][at[i]];
            }
        }
    }
    for (double r : rem) {
        if (r > 0.0) throw NumericalError("initial coupling: failed to exhaust the masses");
    }

    double sum = 0.0;
    for (double w : out.measure.weights) sum += w;
    for (double& w : out.measure.weights) w /= sum;
    out.measure.validate();

    out.active = out.measure.points;
    if (out.flag != 0) {
        // A tie can leave fewer than m+1 atoms, which may be too thin a point
        // set to keep the restricted dual bounded. Add every single-coordinate
        // vertex perturbation of the atoms.
        for (const auto& atom : out.measure.points) {
            for (std::size_t i = 0; i < n; ++i) {
                for (double v : vertices[i]) {
                    std::vector<double> x = atom;
                    x[i] = v;
                    bool dup = false;
                    for (const auto& a : out.active) {
                        if (close_linf(a, x, 1e-12)) {
                            dup = true;
                            break;
                        }
                    }
                    if (!dup) out.active.push_back(std::move(x));
                }
            }
        }
    }
    return out;
}

LsipResult run_algorithm1(const CPWACost& f, const std::vector<TestBasis>& bases,
                          const std::vector<std::vector<double>>& gbar,
                          const std::vector<std::vector<double>>& active0,
                          const OracleFn& oracle, double eps_lsip, long max_cuts) {
    const std::size_t n = bases.size();
    if (n == 0) throw DomainError("cutting plane: no marginals");
    if (f.box.dims() != n) throw DomainError("cutting plane: cost and basis dimensions differ");
    if (gbar.size() != n) throw DomainError("cutting plane: moment target count differs");
    std::vector<std::size_t> offset(n, 0);
    std::size_t m = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (gbar[i].size() != bases[i].size())
            throw DomainError("cutting plane: moment target count differs");
        offset[i] = m;
        m += bases[i].size();
    }
    if (active0.empty()) throw DomainError("cutting plane: empty initial point set");
    if (!(eps_lsip > 0.0)) throw DomainError("cutting plane: tolerance must be positive");

    // Master in column form: one equality row for total mass, one per moment.
    std::vector<double> rhs(1 + m);
    rhs[0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < gbar[i].size(); ++j) rhs[1 + offset[i] + j] = gbar[i][j];
    }
    SimplexEngine eng(1 + m, 0, rhs);
    const int col0 = static_cast<int>(1 + m);  // engine id of the first point column

    std::vector<std::vector<double>> active;
    auto add_point = [&](const std::vector<double>& x) -> bool {
        if (x.size() != n) throw DomainError("cutting plane: point dimension differs");
        for (const auto& a : active) {
            if (close_linf(a, x, 1e-12)) return false;
        }
        SparseCol col;
        col.index.push_back(0);
        col.value.push_back(1.0);
        for (std::size_t i = 0; i < n; ++i) {
            int idx[2];
            double val[2];
            const int k = bases[i].eval_sparse(x[i], idx, val);
            for (int t = 0; t < k; ++t) {
                col.index.push_back(static_cast<int>(1 + offset[i]) + idx[t] - 1);
                col.value.push_back(val[t]);
            }
        }
        eng.add_column(col, f.eval(x), 0.0, kInf);
        active.push_back(x);
        return true;
    };
    for (const auto& x : active0) add_point(x);

    LsipResult res;
    for (long r = 0;; ++r) {
        if (eng.solve() != LPStatus::Optimal)
            throw NumericalError("cutting plane: master LP did not solve");
        const double alpha = eng.objective();

        DualVector yv;
        yv.y0 = eng.dual(0);
        yv.y.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            yv.y[i].resize(bases[i].size());
            for (std::size_t j = 0; j < bases[i].size(); ++j)
                yv.y[i][j] = eng.dual(static_cast<int>(1 + offset[i] + j));
        }

        const auto t0 = std::chrono::steady_clock::now();
        const OracleResult sep = oracle(yv);
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;

        const double s = sep.bound;
        const double gap = yv.y0 - s;
        res.log.push_back({r, alpha, yv.y0, s, gap, active.size(), dt.count()});

        // Exit snapshot: the shifted offset s makes (s, y) feasible for every
        // point, and alpha - y0 + s is its objective by LP duality.
        res.alpha_ub = alpha;
        res.alpha_lb = alpha - yv.y0 + s;
        res.y0_hat = s;
        res.y_hat = yv;
        res.y_hat.y0 = s;

        if (gap <= eps_lsip) {
            res.converged = true;
            break;
        }
        if (res.cuts_added >= max_cuts) break;

        long added = 0;
        for (const auto& p : sep.pool) {
            if (res.cuts_added >= max_cuts) break;
            if (add_point(p)) {
                ++added;
                ++res.cuts_added;
            }
        }
        if (added == 0) {
            if (res.cuts_added >= max_cuts) break;
            throw NumericalError(
                "cutting plane: separation produced no new points while the gap exceeds "
                "tolerance");
        }
    }

    double total = 0.0;
    for (std::size_t k = 0; k < active.size(); ++k) {
        const double w = eng.x(col0 + static_cast<int>(k));
        if (w > 1e-12) {
            res.mu_hat.points.push_back(active[k]);
            res.mu_hat.weights.push_back(w);
            total += w;
        }
    }
    if (res.mu_hat.weights.empty())
        throw NumericalError("cutting plane: master returned an empty measure");
    for (double& w : res.mu_hat.weights) w /= total;
    res.mu_hat.validate();
    return res;
}

MomentReport verify_moment_feasibility(const DiscreteMeasure& mu,
                                       const std::vector<TestBasis>& bases,
                                       const std::vector<std::vector<double>>& gbar) {
    mu.validate(1e-9);
    const std::size_t n = bases.size();
    if (mu.dims() != n) throw DomainError("moment check: measure and basis dimensions differ");
    if (gbar.size() != n) throw DomainError("moment check: moment target count differs");

    MomentReport rep;
    for (std::size_t i = 0; i < n; ++i) {
        if (gbar[i].size() != bases[i].size())
            throw DomainError("moment check: moment target count differs");
        std::vector<double> acc(bases[i].size(), 0.0);
        for (std::size_t k = 0; k < mu.size(); ++k) {
            int idx[2];
            double val[2];
            const int cnt = bases[i].eval_sparse(mu.points[k][i], idx, val);
            for (int t = 0; t < cnt; ++t)
                acc[static_cast<std::size_t>(idx[t] - 1)] += mu.weights[k] * val[t];
        }
        for (std::size_t j = 0; j < acc.size(); ++j)
            rep.max_residual = std::max(rep.max_residual, std::abs(acc[j] - gbar[i][j]));
    }
    rep.pass = rep.max_residual <= 1e-8;
    return rep;
}

}  // namespace mmot
