#include "mmot/lp.hpp"

#include <algorithm>
#include <cmath>

#include "mmot/errors.hpp"

namespace mmot {

namespace {

constexpr double kFeasTol = 1e-9;
constexpr double kOptTol = 1e-9;
constexpr double kPivotTol = 1e-10;
constexpr double kDegenerateStep = 1e-11;
constexpr int kRefactorInterval = 128;

}  // namespace

SimplexEngine::SimplexEngine(std::size_t n_eq, std::size_t n_le, std::vector<double> rhs)
    : n_rows_(n_eq + n_le), n_eq_(n_eq), rhs_(std::move(rhs)) {
    if (rhs_.size() != n_rows_) throw DomainError("simplex: rhs size mismatch");
    // One logical column per row: artificial (fixed at 0) for equality rows,
    // slack for inequality rows. They form the initial identity basis.
    cols_.resize(n_rows_);
    cost_.assign(n_rows_, 0.0);
    lo_.resize(n_rows_);
    up_.resize(n_rows_);
    basis_.resize(n_rows_);
    vstat_.assign(n_rows_, VStat::Basic);
    x_.resize(n_rows_);
    for (std::size_t r = 0; r < n_rows_; ++r) {
        cols_[r].index.push_back(static_cast<int>(r));
        cols_[r].value.push_back(1.0);
        lo_[r] = 0.0;
        up_[r] = r < n_eq_ ? 0.0 : kInf;
        basis_[r] = static_cast<int>(r);
        x_[r] = rhs_[r];
    }
    binv_ = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n_rows_),
                                      static_cast<Eigen::Index>(n_rows_));
    y_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_rows_));
    factor_stale_ = false;
}

int SimplexEngine::add_column(const SparseCol& col, double cost, double lo, double hi) {
    for (int r : col.index)
        if (r < 0 || static_cast<std::size_t>(r) >= n_rows_)
            throw DomainError("simplex: column row index out of range");
    const int id = static_cast<int>(cols_.size());
    cols_.push_back(col);
    cost_.push_back(cost);
    lo_.push_back(lo);
    up_.push_back(hi);
    if (std::isfinite(lo)) {
        vstat_.push_back(VStat::AtLower);
        x_.push_back(lo);
    } else if (std::isfinite(hi)) {
        vstat_.push_back(VStat::AtUpper);
        x_.push_back(hi);
    } else {
        vstat_.push_back(VStat::FreeNB);
        x_.push_back(0.0);
    }
    ++n_structural_;
    return id;
}

void SimplexEngine::set_bounds(int col, double lo, double hi) {
    lo_[static_cast<std::size_t>(col)] = lo;
    up_[static_cast<std::size_t>(col)] = hi;
}

void SimplexEngine::set_cost(int col, double cost) {
    cost_[static_cast<std::size_t>(col)] = cost;
}

void SimplexEngine::set_basis(const std::vector<int>& basis,
                              const std::vector<std::int8_t>* at_upper) {
    if (basis.size() != n_rows_) throw DomainError("simplex: basis size mismatch");
    std::fill(vstat_.begin(), vstat_.end(), VStat::AtLower);
    basis_ = basis;
    for (int j : basis_) {
        if (j < 0 || static_cast<std::size_t>(j) >= cols_.size())
            throw DomainError("simplex: basis column out of range");
        vstat_[static_cast<std::size_t>(j)] = VStat::Basic;
    }
    if (at_upper != nullptr)
        for (std::size_t j = 0; j < cols_.size() && j < at_upper->size(); ++j)
            if ((*at_upper)[j] != 0 && vstat_[j] != VStat::Basic) vstat_[j] = VStat::AtUpper;
    factor_stale_ = true;
}

std::vector<std::int8_t> SimplexEngine::upper_flags() const {
    std::vector<std::int8_t> flags(cols_.size(), 0);
    for (std::size_t j = 0; j < cols_.size(); ++j)
        if (vstat_[j] == VStat::AtUpper) flags[j] = 1;
    return flags;
}

void SimplexEngine::snap_nonbasic() {
    for (std::size_t j = 0; j < cols_.size(); ++j) {
        if (vstat_[j] == VStat::Basic) continue;
        const bool lo_fin = std::isfinite(lo_[j]);
        const bool up_fin = std::isfinite(up_[j]);
        if (vstat_[j] == VStat::AtUpper && up_fin) {
            x_[j] = up_[j];
        } else if (lo_fin) {
            vstat_[j] = VStat::AtLower;
            x_[j] = lo_[j];
        } else if (up_fin) {
            vstat_[j] = VStat::AtUpper;
            x_[j] = up_[j];
        } else {
            vstat_[j] = VStat::FreeNB;
            x_[j] = 0.0;
        }
    }
}

void SimplexEngine::refactor() {
    const auto n = static_cast<Eigen::Index>(n_rows_);
    Eigen::MatrixXd basis_matrix = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t r = 0; r < n_rows_; ++r) {
        const auto& col = cols_[static_cast<std::size_t>(basis_[r])];
        for (std::size_t k = 0; k < col.index.size(); ++k)
            basis_matrix(col.index[k], static_cast<Eigen::Index>(r)) = col.value[k];
    }
    bool good = n_rows_ > 0;
    if (n_rows_ > 0) {
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis_matrix);
        binv_ = lu.inverse();
        // Probe the factorization; a singular warm basis falls through to the
        // greedy rebuild below.
        for (Eigen::Index probe : {Eigen::Index(0), n / 2}) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
            e(probe) = 1.0;
            const double resid = (basis_matrix * (binv_ * e) - e).cwiseAbs().maxCoeff();
            if (!(resid < 1e-6)) {
                good = false;
                break;
            }
        }
    }
    if (!good && n_rows_ > 0) {
        // Rebuild from the logical identity, entering the requested columns
        // one at a time where they have workable pivots.
        std::vector<int> wanted;
        wanted.reserve(n_rows_);
        for (int j : basis_)
            if (static_cast<std::size_t>(j) >= n_rows_) wanted.push_back(j);
        binv_ = Eigen::MatrixXd::Identity(n, n);
        std::vector<bool> row_is_logical(n_rows_, true);
        for (std::size_t r = 0; r < n_rows_; ++r) basis_[r] = static_cast<int>(r);
        for (std::size_t j = 0; j < cols_.size(); ++j)
            if (vstat_[j] == VStat::Basic && j >= n_rows_) vstat_[j] = VStat::AtLower;
        for (std::size_t r = 0; r < n_rows_; ++r) vstat_[r] = VStat::Basic;
        Eigen::VectorXd w(n);
        for (int j : wanted) {
            ftran(cols_[static_cast<std::size_t>(j)], w);
            int best_row = -1;
            double best = 1e-7;
            for (std::size_t r = 0; r < n_rows_; ++r)
                if (row_is_logical[r] && std::abs(w(static_cast<Eigen::Index>(r))) > best) {
                    best = std::abs(w(static_cast<Eigen::Index>(r)));
                    best_row = static_cast<int>(r);
                }
            if (best_row < 0) continue;  // dependent column stays nonbasic
            const auto r = static_cast<Eigen::Index>(best_row);
            const Eigen::RowVectorXd old_row = binv_.row(r);
            Eigen::VectorXd u = -w / w(r);  // u = (e_r - w)/w_r
            u(r) += 1.0 / w(r);
            binv_.noalias() += u * old_row;
            vstat_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(best_row)])] =
                VStat::AtLower;
            vstat_[static_cast<std::size_t>(j)] = VStat::Basic;
            basis_[static_cast<std::size_t>(best_row)] = j;
            row_is_logical[static_cast<std::size_t>(best_row)] = false;
        }
        snap_nonbasic();
    }
    factor_stale_ = false;
    pivots_since_refactor_ = 0;
    rebuild_basic_values();
}

void SimplexEngine::rebuild_basic_values() {
    Eigen::VectorXd rhs_eff(static_cast<Eigen::Index>(n_rows_));
    for (std::size_t r = 0; r < n_rows_; ++r) rhs_eff(static_cast<Eigen::Index>(r)) = rhs_[r];
    for (std::size_t j = 0; j < cols_.size(); ++j) {
        if (vstat_[j] == VStat::Basic || x_[j] == 0.0) continue;
        const auto& col = cols_[j];
        for (std::size_t k = 0; k < col.index.size(); ++k)
            rhs_eff(col.index[k]) -= col.value[k] * x_[j];
    }
    const Eigen::VectorXd xb = binv_ * rhs_eff;
    for (std::size_t r = 0; r < n_rows_; ++r)
        x_[static_cast<std::size_t>(basis_[r])] = xb(static_cast<Eigen::Index>(r));
}

void SimplexEngine::ftran(const SparseCol& col, Eigen::VectorXd& w) const {
    w.setZero(static_cast<Eigen::Index>(n_rows_));
    for (std::size_t k = 0; k < col.index.size(); ++k)
        w += col.value[k] * binv_.col(col.index[k]);
}

void SimplexEngine::price(bool phase_one, Eigen::VectorXd& y_out,
                          std::vector<double>& d_out) const {
    const auto n = static_cast<Eigen::Index>(n_rows_);
    Eigen::VectorXd cb(n);
    for (std::size_t r = 0; r < n_rows_; ++r) {
        const auto j = static_cast<std::size_t>(basis_[r]);
        double c = 0.0;
        if (phase_one) {
            if (x_[j] > up_[j] + kFeasTol)
                c = 1.0;
            else if (x_[j] < lo_[j] - kFeasTol)
                c = -1.0;
        } else {
            c = cost_[j];
        }
        cb(static_cast<Eigen::Index>(r)) = c;
    }
    y_out.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) y_out(i) = binv_.col(i).dot(cb);
    d_out.assign(cols_.size(), 0.0);
    for (std::size_t j = 0; j < cols_.size(); ++j) {
        if (vstat_[j] == VStat::Basic) continue;
        double d = phase_one ? 0.0 : cost_[j];
        const auto& col = cols_[j];
        for (std::size_t k = 0; k < col.index.size(); ++k)
            d -= col.value[k] * y_out(col.index[k]);
        d_out[j] = d;
    }
}

bool SimplexEngine::basic_infeasible() const {
    for (int j : basis_) {
        const auto u = static_cast<std::size_t>(j);
        if (x_[u] > up_[u] + kFeasTol || x_[u] < lo_[u] - kFeasTol) return true;
    }
    return false;
}

double SimplexEngine::infeasibility() const {
    double total = 0.0;
    for (int j : basis_) {
        const auto u = static_cast<std::size_t>(j);
        total += std::max(0.0, x_[u] - up_[u]) + std::max(0.0, lo_[u] - x_[u]);
    }
    return total;
}

LPStatus SimplexEngine::iterate(bool phase_one) {
    const long max_pivots =
        20000 + 10 * static_cast<long>(n_rows_ + cols_.size());
    const long bland_threshold = 5 * static_cast<long>(n_rows_ + cols_.size());
    long stall = 0;
    bool bland = false;
    std::vector<double> d;
    Eigen::VectorXd w(static_cast<Eigen::Index>(n_rows_));

    for (long pivot = 0;; ++pivot) {
        if (pivot > max_pivots) throw NumericalError("simplex: pivot limit reached");
        if (factor_stale_ || pivots_since_refactor_ >= kRefactorInterval) refactor();
        price(phase_one, y_, d);

        // Entering selection: Dantzig by default, Bland while stalled.
        int enter = -1;
        int dir = 0;
        double best_viol = kOptTol;
        for (std::size_t j = 0; j < cols_.size(); ++j) {
            if (vstat_[j] == VStat::Basic) continue;
            if (lo_[j] == up_[j]) continue;  // fixed, can never move
            double viol = 0.0;
            int cand_dir = 0;
            if (vstat_[j] == VStat::AtLower && d[j] < -kOptTol) {
                viol = -d[j];
                cand_dir = 1;
            } else if (vstat_[j] == VStat::AtUpper && d[j] > kOptTol) {
                viol = d[j];
                cand_dir = -1;
            } else if (vstat_[j] == VStat::FreeNB && std::abs(d[j]) > kOptTol) {
                viol = std::abs(d[j]);
                cand_dir = d[j] > 0.0 ? -1 : 1;
            } else {
                continue;
            }
            if (bland) {
                enter = static_cast<int>(j);
                dir = cand_dir;
                break;
            }
            if (viol > best_viol) {
                best_viol = viol;
                enter = static_cast<int>(j);
                dir = cand_dir;
            }
        }
        if (enter < 0) {
            if (!phase_one) return LPStatus::Optimal;
            return infeasibility() <= kFeasTol * (1.0 + static_cast<double>(n_rows_))
                       ? LPStatus::Optimal
                       : LPStatus::Infeasible;
        }

        const auto je = static_cast<std::size_t>(enter);
        ftran(cols_[je], w);

        // Ratio test. Basic variables move at rate -dir*w_i; in Phase I a
        // variable beyond a bound blocks at the first bound on its path.
        double theta = kInf;
        int leave_row = -1;
        double leave_target = 0.0;
        double best_pivot_mag = 0.0;
        for (std::size_t r = 0; r < n_rows_; ++r) {
            const double wi = w(static_cast<Eigen::Index>(r));
            if (std::abs(wi) <= kPivotTol) continue;
            const double rate = -static_cast<double>(dir) * wi;
            const auto jb = static_cast<std::size_t>(basis_[r]);
            const double xb = x_[jb];
            double target;
            if (rate > 0.0) {
                if (xb > up_[jb] + kFeasTol) continue;  // moving further above, no block
                target = (phase_one && xb < lo_[jb] - kFeasTol) ? lo_[jb] : up_[jb];
            } else {
                if (xb < lo_[jb] - kFeasTol) continue;
                target = (phase_one && xb > up_[jb] + kFeasTol) ? up_[jb] : lo_[jb];
            }
            if (!std::isfinite(target)) continue;
            double limit = (target - xb) / rate;
            if (limit < 0.0) limit = 0.0;  // fp drift guard
            bool take;
            if (leave_row < 0)
                take = limit < theta;
            else if (limit < theta - kDegenerateStep)
                take = true;
            else if (limit < theta + kDegenerateStep)
                take = bland ? basis_[r] < basis_[static_cast<std::size_t>(leave_row)]
                             : std::abs(wi) > best_pivot_mag;
            else
                take = false;
            if (take) {
                theta = limit;
                leave_row = static_cast<int>(r);
                leave_target = target;
                best_pivot_mag = std::abs(wi);
            }
        }
        const double flip_range =
            std::isfinite(lo_[je]) && std::isfinite(up_[je]) ? up_[je] - lo_[je] : kInf;

        if (theta >= flip_range) {
            // Entering variable reaches its opposite bound first.
            if (!std::isfinite(flip_range)) {
                if (phase_one) throw NumericalError("simplex: unbounded Phase I direction");
                return LPStatus::Unbounded;
            }
            const double step = static_cast<double>(dir) * flip_range;
            for (std::size_t r = 0; r < n_rows_; ++r) {
                const double wi = w(static_cast<Eigen::Index>(r));
                if (wi != 0.0) x_[static_cast<std::size_t>(basis_[r])] -= step * wi;
            }
            x_[je] = vstat_[je] == VStat::AtLower ? up_[je] : lo_[je];
            vstat_[je] = vstat_[je] == VStat::AtLower ? VStat::AtUpper : VStat::AtLower;
            if (flip_range > kDegenerateStep) {
                stall = 0;
                bland = false;
            }
            continue;
        }

        // Pivot: entering moves by theta, leaving lands exactly on its bound.
        const double step = static_cast<double>(dir) * theta;
        for (std::size_t r = 0; r < n_rows_; ++r) {
            const double wi = w(static_cast<Eigen::Index>(r));
            if (wi != 0.0) x_[static_cast<std::size_t>(basis_[r])] -= step * wi;
        }
        const auto lr = static_cast<std::size_t>(leave_row);
        const auto jl = static_cast<std::size_t>(basis_[lr]);
        x_[jl] = leave_target;
        vstat_[jl] = leave_target == lo_[jl] ? VStat::AtLower : VStat::AtUpper;
        x_[je] = x_[je] + step;
        vstat_[je] = VStat::Basic;
        basis_[lr] = enter;

        const auto rr = static_cast<Eigen::Index>(leave_row);
        const Eigen::RowVectorXd old_row = binv_.row(rr);
        const double wr = w(rr);
        Eigen::VectorXd u = -w / wr;  // u = (e_r - w)/w_r, applied as rank-1 update
        u(rr) += 1.0 / wr;
        binv_.noalias() += u * old_row;

        ++pivots_since_refactor_;
        ++total_pivots_;
        if (theta <= kDegenerateStep) {
            if (++stall > bland_threshold) bland = true;
        } else {
            stall = 0;
            bland = false;
        }
    }
}

LPStatus SimplexEngine::solve() {
    snap_nonbasic();
    if (factor_stale_)
        refactor();
    else
        rebuild_basic_values();
    for (int attempt = 0;; ++attempt) {
        if (basic_infeasible()) {
            const LPStatus phase1 = iterate(true);
            if (phase1 == LPStatus::Infeasible) return LPStatus::Infeasible;
        }
        const LPStatus status = iterate(false);
        if (status != LPStatus::Optimal) return status;
        // Re-derive basic values from a fresh factorization and confirm both
        // feasibility and optimality survived the pivot updates.
        refactor();
        if (!basic_infeasible()) {
            std::vector<double> d;
            price(false, y_, d);
            bool optimal = true;
            for (std::size_t j = 0; j < cols_.size() && optimal; ++j) {
                if (vstat_[j] == VStat::Basic || lo_[j] == up_[j]) continue;
                if (vstat_[j] == VStat::AtLower && d[j] < -10 * kOptTol) optimal = false;
                if (vstat_[j] == VStat::AtUpper && d[j] > 10 * kOptTol) optimal = false;
                if (vstat_[j] == VStat::FreeNB && std::abs(d[j]) > 10 * kOptTol)
                    optimal = false;
            }
            if (optimal) return LPStatus::Optimal;
        }
        if (attempt >= 2)
            throw NumericalError("simplex: residuals persist after refactorization");
    }
}

double SimplexEngine::objective() const {
    double v = 0.0;
    for (std::size_t j = 0; j < cols_.size(); ++j) v += cost_[j] * x_[j];
    return v;
}

double SimplexEngine::reduced_cost(int col) const {
    const auto j = static_cast<std::size_t>(col);
    if (vstat_[j] == VStat::Basic) return 0.0;
    double d = cost_[j];
    const auto& c = cols_[j];
    for (std::size_t k = 0; k < c.index.size(); ++k) d -= c.value[k] * y_(c.index[k]);
    return d;
}

// ---------------------------------------------------------------------------
// One-shot public interface

LPSolution solve(const LPProblem& problem) {
    const std::size_t n = problem.c.size();
    const std::size_t n_eq = problem.a_eq.size();
    const std::size_t n_le = problem.a_le.size();
    if (problem.b_eq.size() != n_eq || problem.b_le.size() != n_le)
        throw DomainError("lp: rhs size mismatch");
    std::vector<double> lower = problem.lower, upper = problem.upper;
    if (lower.empty()) lower.assign(n, 0.0);
    if (upper.empty()) upper.assign(n, kInf);
    if (lower.size() != n || upper.size() != n) throw DomainError("lp: bounds size mismatch");

    const bool maximize = problem.sense == LPProblem::Sense::Max;
    std::vector<double> rhs = problem.b_eq;
    rhs.insert(rhs.end(), problem.b_le.begin(), problem.b_le.end());
    SimplexEngine engine(n_eq, n_le, std::move(rhs));
    for (std::size_t j = 0; j < n; ++j) {
        SparseCol col;
        for (std::size_t r = 0; r < n_eq; ++r) {
            if (problem.a_eq[r].size() != n) throw DomainError("lp: row size mismatch");
            if (problem.a_eq[r][j] != 0.0) {
                col.index.push_back(static_cast<int>(r));
                col.value.push_back(problem.a_eq[r][j]);
            }
        }
        for (std::size_t r = 0; r < n_le; ++r) {
            if (problem.a_le[r].size() != n) throw DomainError("lp: row size mismatch");
            if (problem.a_le[r][j] != 0.0) {
                col.index.push_back(static_cast<int>(n_eq + r));
                col.value.push_back(problem.a_le[r][j]);
            }
        }
        engine.add_column(col, maximize ? -problem.c[j] : problem.c[j], lower[j], upper[j]);
    }

    LPSolution out;
    const LPStatus status = engine.solve();
    out.status = status;
    if (status != LPStatus::Optimal) return out;

    const double sign = maximize ? -1.0 : 1.0;
    out.primal.resize(n);
    out.reduced_costs.resize(n);
    double bound_terms = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const int col = static_cast<int>(engine.rows() + j);
        out.primal[j] = engine.x(col);
        const double d = engine.reduced_cost(col);
        out.reduced_costs[j] = sign * d;
        if (!engine.is_basic(col)) bound_terms += d * engine.x(col);
    }
    out.dual.resize(n_eq + n_le);
    double by = 0.0;
    for (std::size_t r = 0; r < n_eq + n_le; ++r) {
        const double y = engine.dual(static_cast<int>(r));
        out.dual[r] = sign * y;
        by += y * (r < n_eq ? problem.b_eq[r] : problem.b_le[r - n_eq]);
    }
    out.objective = sign * engine.objective();
    out.dual_objective = sign * (by + bound_terms);
    out.basis = engine.basis();
    out.iterations = static_cast<int>(engine.pivots());
    return out;
}

}  // namespace mmot
