#include "mmot/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <queue>

#include "mmot/errors.hpp"
#include "mmot/lp.hpp"

namespace mmot {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * x[i];
    return s;
}

// sum_j yw[j-1] g_j(x) for the hat basis on the given knots, accumulated in
// the same order as TestBasis::eval_sparse so values agree with
// oracle_objective to the last bit.
double hat_sum(const std::vector<double>& knots, const std::vector<double>& yw, double x) {
    const std::size_t m = yw.size();
    if (x < knots.front()) x = knots.front();
    if (x > knots.back()) x = knots.back();
    auto it = std::upper_bound(knots.begin(), knots.end(), x);
    std::size_t c = static_cast<std::size_t>(it - knots.begin());
    c = c == 0 ? 0 : c - 1;
    if (c >= m) c = m - 1;
    const double t = (x - knots[c]) / (knots[c + 1] - knots[c]);
    double s = 0.0;
    if (c >= 1 && t < 1.0) s += (1.0 - t) * yw[c - 1];
    if (t > 0.0) s += t * yw[c];
    return s;
}

// Exact separation objective in model terms, f(x) - sum_i sum_j y g.
double model_objective(const MILPModel& mo, const std::vector<double>& x) {
    double v = mo.cost.eval(x);
    for (std::size_t i = 0; i < mo.dims(); ++i) v -= hat_sum(mo.knots[i], mo.yw[i], x[i]);
    return v;
}

// Flattened piece table for the product scans: positive blocks first, each
// block a contiguous range, sign +1, then negative blocks with sign -1.
struct FlatPieces {
    std::vector<std::vector<double>> a;
    std::vector<double> b;
    std::vector<std::size_t> start;  // block k spans [start[k], start[k+1])
    std::vector<double> sign;

    explicit FlatPieces(const CPWACost& f) {
        start.push_back(0);
        for (const auto& block : f.pos_blocks) {
            for (const auto& p : block) a.push_back(p.a), b.push_back(p.b);
            start.push_back(a.size());
            sign.push_back(1.0);
        }
        for (const auto& block : f.neg_blocks) {
            for (const auto& p : block) a.push_back(p.a), b.push_back(p.b);
            start.push_back(a.size());
            sign.push_back(-1.0);
        }
    }
};

// Evaluates f(x) - sum_i yterm[i][idx_i] at every point of the coordinate
// product, reusing partial dot products across the shared prefix. visit is
// called in row-major order (last dimension fastest) with the value and the
// current multi-index.
template <class Visit>
void scan_product(const CPWACost& f, const std::vector<std::vector<double>>& coords,
                  const std::vector<std::vector<double>>& yterm, Visit&& visit) {
    const std::size_t n = coords.size();
    const FlatPieces fp(f);
    const std::size_t np = fp.b.size();
    std::vector<std::vector<double>> partial(n, std::vector<double>(np, 0.0));
    std::vector<double> ysum(n, 0.0);
    std::vector<std::size_t> idx(n, 0);

    auto leaf = [&](std::size_t d) {
        const std::vector<double>& base = d == 0 ? fp.b : partial[d - 1];
        const double ybase = d == 0 ? 0.0 : ysum[d - 1];
        const auto& pts = coords[d];
        for (std::size_t p = 0; p < pts.size(); ++p) {
            const double t = pts[p];
            double v = 0.0;
            for (std::size_t k = 0; k + 1 < fp.start.size(); ++k) {
                double best = -kInf;
                for (std::size_t q = fp.start[k]; q < fp.start[k + 1]; ++q)
                    best = std::max(best, base[q] + fp.a[q][d] * t);
                v += fp.sign[k] * best;
            }
            v -= ybase + yterm[d][p];
            idx[d] = p;
            visit(v, idx);
        }
    };

    auto rec = [&](auto&& self, std::size_t d) -> void {
        if (d + 1 == n) {
            leaf(d);
            return;
        }
        const std::vector<double>& base = d == 0 ? fp.b : partial[d - 1];
        const double ybase = d == 0 ? 0.0 : ysum[d - 1];
        for (std::size_t p = 0; p < coords[d].size(); ++p) {
            const double t = coords[d][p];
            for (std::size_t q = 0; q < np; ++q) partial[d][q] = base[q] + fp.a[q][d] * t;
            ysum[d] = ybase + yterm[d][p];
            idx[d] = p;
            self(self, d + 1);
        }
    };
    rec(rec, 0);
}

void check_shapes(const CPWACost& f, const std::vector<TestBasis>& bases,
                  const DualVector& y) {
    const std::size_t n = f.box.dims();
    if (bases.size() != n) throw DomainError("oracle: basis count does not match cost dimension");
    if (y.y.size() != n) throw DomainError("oracle: dual weight count does not match cost dimension");
    for (std::size_t i = 0; i < n; ++i)
        if (y.y[i].size() != bases[i].size())
            throw DomainError("oracle: dual weights do not match basis size");
}

// Exact minimization of f(x) - sum y g along coordinate i with the other
// coordinates held fixed: the restriction is piecewise affine, so the minimum
// sits at a knot, an endpoint, or a kink where two pieces of a block cross.
double minimize_coordinate(const MILPModel& mo, std::vector<double>& x, std::size_t i) {
    const auto& knots = mo.knots[i];
    std::vector<double> cand(knots.begin(), knots.end());
    struct Line {
        double alpha, c;
    };
    std::vector<std::vector<Line>> blocks;
    std::vector<double> sign;
    auto load = [&](const std::vector<std::vector<AffinePiece>>& src, double sg) {
        for (const auto& block : src) {
            std::vector<Line> lines;
            for (const auto& p : block)
                lines.push_back({p.a[i], dot(p.a, x) - p.a[i] * x[i] + p.b});
            blocks.push_back(std::move(lines));
            sign.push_back(sg);
        }
    };
    load(mo.cost.pos_blocks, 1.0);
    load(mo.cost.neg_blocks, -1.0);
    for (const auto& lines : blocks)
        for (std::size_t p = 0; p < lines.size(); ++p)
            for (std::size_t q = p + 1; q < lines.size(); ++q) {
                const double da = lines[p].alpha - lines[q].alpha;
                if (std::abs(da) < 1e-13) continue;
                const double t = (lines[q].c - lines[p].c) / da;
                if (t >= knots.front() && t <= knots.back()) cand.push_back(t);
            }
    std::sort(cand.begin(), cand.end());
    double best_t = x[i];
    double best_v = kInf;
    for (double t : cand) {
        double v = 0.0;
        for (std::size_t k = 0; k < blocks.size(); ++k) {
            double m = -kInf;
            for (const auto& ln : blocks[k]) m = std::max(m, ln.alpha * t + ln.c);
            v += sign[k] * m;
        }
        v -= hat_sum(knots, mo.yw[i], t);
        if (v < best_v) {
            best_v = v;
            best_t = t;
        }
    }
    x[i] = best_t;
    return best_v;
}

// Deterministic warm-start point: per-dimension best knot for the separable
// part, then coordinatewise exact descent sweeps until no coordinate moves.
std::vector<double> descend_start(const MILPModel& mo) {
    const std::size_t n = mo.dims();
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& yw = mo.yw[i];
        std::size_t arg = 0;  // knot 0 carries weight 0 (the dropped hat)
        double best = 0.0;
        for (std::size_t j = 0; j < yw.size(); ++j)
            if (yw[j] > best) {
                best = yw[j];
                arg = j + 1;
            }
        x[i] = mo.knots[i][arg];
    }
    double val = model_objective(mo, x);
    for (int sweep = 0; sweep < 8; ++sweep) {
        const std::vector<double> before = x;
        for (std::size_t i = 0; i < n; ++i) minimize_coordinate(mo, x, i);
        const double now = model_objective(mo, x);
        if (x == before || now >= val - 1e-12 * (1.0 + std::abs(val))) {
            val = std::min(val, now);
            break;
        }
        val = now;
    }
    return x;
}

// Branch-and-bound node: a cell window per dimension (which knots the
// coordinate may lie between) plus per-piece selector fixings, and the parent
// basis for warm starts. Nodes reached by diving reuse the engine state
// in place and carry no basis snapshot.
struct NodeState {
    double bound = -kInf;
    long id = 0;
    std::vector<std::int16_t> lo_cell, hi_cell;
    std::vector<std::int8_t> delta_fix;
    std::vector<int> basis;
    std::vector<std::int8_t> at_upper;
};

struct NodeOrder {
    bool operator()(const NodeState& a, const NodeState& b) const {
        if (a.bound != b.bound) return a.bound > b.bound;
        return a.id > b.id;
    }
};

}  // namespace

double oracle_objective(const CPWACost& f, const std::vector<TestBasis>& bases,
                        const DualVector& y, const std::vector<double>& x) {
    check_shapes(f, bases, y);
    if (x.size() != bases.size()) throw DomainError("oracle: point dimension mismatch");
    double v = f.eval(x);
    int idx[2];
    double val[2];
    for (std::size_t i = 0; i < bases.size(); ++i) {
        const int n = bases[i].eval_sparse(x[i], idx, val);
        double s = 0.0;
        for (int t = 0; t < n; ++t) s += val[t] * y.y[i][static_cast<std::size_t>(idx[t] - 1)];
        v -= s;
    }
    return v;
}

double MILPModel::x_from_z(std::size_t i, const std::vector<double>& z) const {
    if (z.size() != hats(i)) throw DomainError("model: fill level count mismatch");
    double x = knots[i][0];
    for (std::size_t j = 0; j < z.size(); ++j) x += (knots[i][j + 1] - knots[i][j]) * z[j];
    return x;
}

double MILPModel::z_term(const std::vector<std::vector<double>>& z) const {
    if (z.size() != dims()) throw DomainError("model: fill level count mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < dims(); ++i) {
        if (z[i].size() != hats(i)) throw DomainError("model: fill level count mismatch");
        double prev = 0.0;
        for (std::size_t j = 0; j < z[i].size(); ++j) {
            s += (yw[i][j] - prev) * z[i][j];
            prev = yw[i][j];
        }
    }
    return s;
}

MILPModel build_milp(const CPWACost& f, const std::vector<TestBasis>& bases,
                     const DualVector& y) {
    check_shapes(f, bases, y);
    MILPModel mo;
    mo.cost = f;
    const std::size_t n = bases.size();
    mo.knots.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        mo.knots[i] = bases[i].cover().knots;
        const double guard = 1e-9 * (1.0 + std::abs(f.box.lo[i]) + std::abs(f.box.hi[i]));
        if (mo.knots[i].front() < f.box.lo[i] - guard || mo.knots[i].back() > f.box.hi[i] + guard)
            throw DomainError("build_milp: cover leaves the cost box");
    }
    mo.yw = y.y;
    mo.objective_offset = -y.y0;

    // The optimization domain is the product of the cover intervals; big-M
    // constants and the lambda/zeta floors are computed over it.
    Box dom;
    dom.lo.resize(n);
    dom.hi.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        dom.lo[i] = mo.knots[i].front();
        dom.hi[i] = mo.knots[i].back();
    }

    const std::size_t npos = f.pos_blocks.size();
    const std::size_t nneg = f.neg_blocks.size();
    std::size_t total_s = 0;
    std::vector<int> s_start;
    for (const auto& block : f.neg_blocks) {
        s_start.push_back(static_cast<int>(total_s));
        total_s += block.size();
    }
    std::size_t total_z = 0, total_iota = 0;
    std::vector<int> z_start;
    for (std::size_t i = 0; i < n; ++i) {
        z_start.push_back(static_cast<int>(total_z));
        total_z += bases[i].size();
        total_iota += bases[i].size() - 1;
    }

    mo.x_off = 0;
    mo.lambda_off = static_cast<int>(n);
    mo.zeta_off = mo.lambda_off + static_cast<int>(npos);
    mo.s_off = mo.zeta_off + static_cast<int>(nneg);
    mo.z_off = mo.s_off + static_cast<int>(total_s);
    mo.delta_off = mo.z_off + static_cast<int>(total_z);
    mo.iota_off = mo.delta_off + static_cast<int>(total_s);
    mo.n_cols = mo.iota_off + static_cast<int>(total_iota);
    mo.obj.assign(static_cast<std::size_t>(mo.n_cols), 0.0);
    mo.lo.assign(static_cast<std::size_t>(mo.n_cols), 0.0);
    mo.hi.assign(static_cast<std::size_t>(mo.n_cols), 1.0);
    mo.binary.assign(static_cast<std::size_t>(mo.n_cols), 0);

    auto z_col = [&](std::size_t i, std::size_t j) {  // hat index j = 1..m_i
        return mo.z_off + z_start[i] + static_cast<int>(j) - 1;
    };
    auto iota_col = [&](std::size_t i, std::size_t j) {  // j = 1..m_i-1
        return mo.iota_off + (z_start[i] - static_cast<int>(i)) + static_cast<int>(j) - 1;
    };

    for (std::size_t i = 0; i < n; ++i) {
        mo.lo[static_cast<std::size_t>(mo.x_off) + i] = dom.lo[i];
        mo.hi[static_cast<std::size_t>(mo.x_off) + i] = dom.hi[i];
    }
    for (std::size_t k = 0; k < npos; ++k) {
        double floor = -kInf;
        for (const auto& p : f.pos_blocks[k])
            floor = std::max(floor, box_min_linear(p.a, p.b, dom));
        mo.obj[static_cast<std::size_t>(mo.lambda_off) + k] = 1.0;
        mo.lo[static_cast<std::size_t>(mo.lambda_off) + k] = floor;
        mo.hi[static_cast<std::size_t>(mo.lambda_off) + k] = kInf;
    }
    for (std::size_t k = 0; k < nneg; ++k) {
        double floor = -kInf;
        for (const auto& p : f.neg_blocks[k])
            floor = std::max(floor, box_min_linear(p.a, p.b, dom));
        mo.obj[static_cast<std::size_t>(mo.zeta_off) + k] = -1.0;
        mo.lo[static_cast<std::size_t>(mo.zeta_off) + k] = floor;
        mo.hi[static_cast<std::size_t>(mo.zeta_off) + k] = kInf;
    }

    mo.big_m.resize(nneg);
    for (std::size_t k = 0; k < nneg; ++k) {
        const auto& block = f.neg_blocks[k];
        mo.big_m[k].resize(block.size());
        for (std::size_t q = 0; q < block.size(); ++q) {
            double m = 0.0;
            std::vector<double> diff(n);
            for (std::size_t r = 0; r < block.size(); ++r) {
                for (std::size_t i = 0; i < n; ++i) diff[i] = block[r].a[i] - block[q].a[i];
                m = std::max(m, box_max_linear(diff, block[r].b - block[q].b, dom));
            }
            mo.big_m[k][q] = m;
            const std::size_t sc = static_cast<std::size_t>(mo.s_off + s_start[k]) + q;
            mo.lo[sc] = 0.0;
            mo.hi[sc] = m;
            mo.binary[static_cast<std::size_t>(mo.delta_off + s_start[k]) + q] = 1;
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        const auto& yw = mo.yw[i];
        double prev = 0.0;
        for (std::size_t j = 1; j <= yw.size(); ++j) {
            mo.obj[static_cast<std::size_t>(z_col(i, j))] = -(yw[j - 1] - prev);
            prev = yw[j - 1];
        }
        for (std::size_t j = 1; j < yw.size(); ++j)
            mo.binary[static_cast<std::size_t>(iota_col(i, j))] = 1;
    }

    auto x_terms = [&](const AffinePiece& p, LinearRow& row) {
        for (std::size_t i = 0; i < n; ++i)
            if (p.a[i] != 0.0) {
                row.index.push_back(mo.x_off + static_cast<int>(i));
                row.value.push_back(p.a[i]);
            }
    };
    for (std::size_t k = 0; k < npos; ++k)
        for (const auto& p : f.pos_blocks[k]) {
            LinearRow row;
            x_terms(p, row);
            row.index.push_back(mo.lambda_off + static_cast<int>(k));
            row.value.push_back(-1.0);
            row.rhs = -p.b;
            mo.rows_pos_le.push_back(std::move(row));
        }
    for (std::size_t k = 0; k < nneg; ++k) {
        const auto& block = f.neg_blocks[k];
        for (std::size_t q = 0; q < block.size(); ++q) {
            LinearRow row;
            x_terms(block[q], row);
            row.index.push_back(mo.s_off + s_start[k] + static_cast<int>(q));
            row.value.push_back(1.0);
            row.index.push_back(mo.zeta_off + static_cast<int>(k));
            row.value.push_back(-1.0);
            row.rhs = -block[q].b;
            mo.rows_neg_eq.push_back(std::move(row));

            LinearRow couple;
            couple.index.push_back(mo.s_off + s_start[k] + static_cast<int>(q));
            couple.value.push_back(1.0);
            if (mo.big_m[k][q] != 0.0) {
                couple.index.push_back(mo.delta_off + s_start[k] + static_cast<int>(q));
                couple.value.push_back(mo.big_m[k][q]);
            }
            couple.rhs = mo.big_m[k][q];
            mo.rows_couple_le.push_back(std::move(couple));
        }
        LinearRow pick;
        for (std::size_t q = 0; q < block.size(); ++q) {
            pick.index.push_back(mo.delta_off + s_start[k] + static_cast<int>(q));
            pick.value.push_back(1.0);
        }
        pick.rhs = 1.0;
        mo.rows_delta_eq.push_back(std::move(pick));
    }
    for (std::size_t i = 0; i < n; ++i) {
        LinearRow row;
        row.index.push_back(mo.x_off + static_cast<int>(i));
        row.value.push_back(1.0);
        for (std::size_t j = 1; j <= mo.yw[i].size(); ++j) {
            row.index.push_back(z_col(i, j));
            row.value.push_back(-(mo.knots[i][j] - mo.knots[i][j - 1]));
        }
        row.rhs = mo.knots[i][0];
        mo.rows_xz_eq.push_back(std::move(row));

        for (std::size_t j = 1; j < mo.yw[i].size(); ++j) {
            LinearRow up;  // z_{i,j+1} <= iota_{i,j}
            up.index = {z_col(i, j + 1), iota_col(i, j)};
            up.value = {1.0, -1.0};
            mo.rows_chain_le.push_back(std::move(up));
            LinearRow down;  // iota_{i,j} <= z_{i,j}
            down.index = {iota_col(i, j), z_col(i, j)};
            down.value = {1.0, -1.0};
            mo.rows_chain_le.push_back(std::move(down));
        }
    }
    return mo;
}

// The node relaxations drop the chain rows and the iota columns: fixing
// iota_{i,t} = 1 is the same as forcing z_{i,j} = 1 for j <= t (the point
// lies right of knot t) and iota_{i,t} = 0 forces z_{i,j} = 0 for j > t, so
// a branch decision is a cell window applied through variable bounds. The
// relaxation value is unchanged: for a fixed coordinate the reachable
// (sum dk z, sum dy z) pairs have the same convex hull with or without the
// ordering rows. Branching picks the window knot nearest the relaxation's
// own coordinate, which is the fractional fill position.
OracleResult solve_bb(const MILPModel& mo, double eps_milp, double pool_slack,
                      long node_cap) {
    const std::size_t n = mo.dims();
    const std::size_t n_delta = static_cast<std::size_t>(mo.iota_off - mo.delta_off);

    const std::size_t n_eq = mo.rows_neg_eq.size() + mo.rows_delta_eq.size() + mo.rows_xz_eq.size();
    const std::size_t n_le = mo.rows_pos_le.size() + mo.rows_couple_le.size();
    const std::size_t n_rows = n_eq + n_le;
    std::vector<double> rhs;
    rhs.reserve(n_rows);
    std::vector<SparseCol> colent(static_cast<std::size_t>(mo.iota_off));
    int row_id = 0;
    auto add_rows = [&](const std::vector<LinearRow>& rows) {
        for (const auto& row : rows) {
            rhs.push_back(row.rhs);
            for (std::size_t t = 0; t < row.index.size(); ++t) {
                auto& col = colent[static_cast<std::size_t>(row.index[t])];
                col.index.push_back(row_id);
                col.value.push_back(row.value[t]);
            }
            ++row_id;
        }
    };
    add_rows(mo.rows_neg_eq);
    add_rows(mo.rows_delta_eq);
    add_rows(mo.rows_xz_eq);
    add_rows(mo.rows_pos_le);
    add_rows(mo.rows_couple_le);

    SimplexEngine eng(n_eq, n_le, rhs);
    for (int c = 0; c < mo.iota_off; ++c)
        eng.add_column(colent[static_cast<std::size_t>(c)], mo.obj[static_cast<std::size_t>(c)],
                       mo.lo[static_cast<std::size_t>(c)], mo.hi[static_cast<std::size_t>(c)]);
    auto ecol = [&](int c) { return static_cast<int>(n_rows) + c; };

    std::vector<int> z_start(n);
    for (std::size_t i = 0, acc = 0; i < n; ++i) {
        z_start[i] = static_cast<int>(acc);
        acc += mo.hats(i);
    }

    // Incumbent bookkeeping: every evaluated point goes through here.
    std::vector<double> inc_x;
    double inc_val = kInf;
    struct PoolEntry {
        double val;
        std::vector<double> x;
    };
    std::vector<PoolEntry> pool;
    auto offer = [&](double val, const std::vector<double>& pt) {
        for (auto& e : pool) {
            double d = 0.0;
            for (std::size_t i = 0; i < n; ++i) d = std::max(d, std::abs(e.x[i] - pt[i]));
            if (d <= 1e-12) {
                if (val < e.val) {
                    e.val = val;
                    e.x = pt;
                }
                if (val < inc_val) {
                    inc_val = val;
                    inc_x = e.x;
                }
                return;
            }
        }
        pool.push_back({val, pt});
        if (val < inc_val) {
            inc_val = val;
            inc_x = pt;
        }
        if (pool.size() > 96) {
            std::vector<PoolEntry> kept;
            for (auto& e : pool)
                if (e.val <= inc_val + pool_slack) kept.push_back(std::move(e));
            if (kept.size() > 96) {
                std::sort(kept.begin(), kept.end(), [](const PoolEntry& a, const PoolEntry& b) {
                    if (a.val != b.val) return a.val < b.val;
                    return a.x < b.x;
                });
                kept.resize(64);
            }
            pool = std::move(kept);
        }
    };

    {
        std::vector<double> x0 = descend_start(mo);
        offer(model_objective(mo, x0), x0);
    }

    NodeState root;
    root.lo_cell.assign(n, 0);
    root.hi_cell.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        root.hi_cell[i] = static_cast<std::int16_t>(mo.hats(i) - 1);
    root.delta_fix.assign(n_delta, -1);

    auto apply_node = [&](const NodeState& nd) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t m = mo.hats(i);
            for (std::size_t j = 1; j <= m; ++j) {
                double zlo = 0.0, zhi = 1.0;
                if (static_cast<int>(j) <= nd.lo_cell[i]) zlo = 1.0;
                if (static_cast<int>(j) > nd.hi_cell[i] + 1) zhi = 0.0;
                eng.set_bounds(ecol(mo.z_off + z_start[i] + static_cast<int>(j) - 1), zlo, zhi);
            }
        }
        for (std::size_t d = 0; d < n_delta; ++d) {
            const int c = ecol(mo.delta_off + static_cast<int>(d));
            if (nd.delta_fix[d] < 0)
                eng.set_bounds(c, 0.0, 1.0);
            else
                eng.set_bounds(c, nd.delta_fix[d], nd.delta_fix[d]);
        }
    };

    std::priority_queue<NodeState, std::vector<NodeState>, NodeOrder> open;
    std::optional<NodeState> dive = std::move(root);
    long next_id = 1;
    long processed = 0;
    double worst_floor = kInf;

    while (true) {
        double outstanding = kInf;
        if (dive) outstanding = dive->bound;
        if (!open.empty()) outstanding = std::min(outstanding, open.top().bound);
        if (outstanding == kInf) break;  // tree exhausted
        if (outstanding >= inc_val - eps_milp) {
            worst_floor = std::min(worst_floor, outstanding);
            break;
        }

        NodeState nd;
        if (dive) {
            nd = std::move(*dive);
            dive.reset();
        } else {
            nd = open.top();
            open.pop();
        }
        if (++processed > node_cap) throw BudgetError("separation: node budget exhausted");

        apply_node(nd);
        if (!nd.basis.empty()) eng.set_basis(nd.basis, &nd.at_upper);
        const LPStatus st = eng.solve();
        if (st == LPStatus::Infeasible) continue;
        if (st == LPStatus::Unbounded) throw NumericalError("separation: relaxation unbounded");

        const double lp_val = eng.objective();
        const double bound_nd = std::max(nd.bound, lp_val);
        if (bound_nd >= inc_val - eps_milp) {
            worst_floor = std::min(worst_floor, bound_nd);
            continue;
        }

        std::vector<double> xs(n);
        for (std::size_t i = 0; i < n; ++i) {
            double v = eng.x(ecol(mo.x_off + static_cast<int>(i)));
            xs[i] = std::min(mo.knots[i].back(), std::max(mo.knots[i].front(), v));
        }
        const double direct = model_objective(mo, xs);
        offer(direct, xs);

        if (direct - bound_nd <= 1e-9 * (1.0 + std::abs(direct))) {
            worst_floor = std::min(worst_floor, bound_nd);
            continue;
        }

        // Branch choice: the most fractional free piece selector wins; with
        // all selectors integral, the dimension whose fill levels overshoot
        // the hat interpolation the most.
        int branch_delta = -1;
        double best_frac = 1e-7;
        for (std::size_t d = 0; d < n_delta; ++d) {
            if (nd.delta_fix[d] >= 0) continue;
            const double v = eng.x(ecol(mo.delta_off + static_cast<int>(d)));
            const double fr = std::abs(v - std::round(v));
            if (fr > best_frac) {
                best_frac = fr;
                branch_delta = static_cast<int>(d);
            }
        }
        int branch_dim = -1;
        if (branch_delta < 0) {
            double best_gap = 1e-9 * (1.0 + std::abs(lp_val));
            for (std::size_t i = 0; i < n; ++i) {
                if (nd.hi_cell[i] <= nd.lo_cell[i]) continue;  // single cell is exact
                double term = 0.0, prev = 0.0;
                for (std::size_t j = 1; j <= mo.hats(i); ++j) {
                    double zv = eng.x(ecol(mo.z_off + z_start[i] + static_cast<int>(j) - 1));
                    zv = std::min(1.0, std::max(0.0, zv));
                    term += (mo.yw[i][j - 1] - prev) * zv;
                    prev = mo.yw[i][j - 1];
                }
                const double gap = term - hat_sum(mo.knots[i], mo.yw[i], xs[i]);
                if (gap > best_gap) {
                    best_gap = gap;
                    branch_dim = static_cast<int>(i);
                }
            }
        }

        if (branch_delta < 0 && branch_dim < 0) {
            // Nothing left to separate beyond roundoff; the candidate above
            // already covers this subtree.
            worst_floor = std::min(worst_floor, bound_nd);
            continue;
        }

        NodeState left = nd, right = nd;
        left.bound = right.bound = bound_nd;
        left.id = next_id++;
        right.id = next_id++;
        left.basis.clear();
        left.at_upper.clear();
        right.basis.clear();
        right.at_upper.clear();
        bool dive_left;
        if (branch_delta >= 0) {
            const double v = eng.x(ecol(mo.delta_off + branch_delta));
            left.delta_fix[static_cast<std::size_t>(branch_delta)] = 0;
            right.delta_fix[static_cast<std::size_t>(branch_delta)] = 1;
            dive_left = v <= 0.5;
        } else {
            const std::size_t i = static_cast<std::size_t>(branch_dim);
            const int lo = nd.lo_cell[i], hi = nd.hi_cell[i];
            int t = lo + 1;
            double best_d = kInf;
            for (int cand = lo + 1; cand <= hi; ++cand) {
                const double d = std::abs(mo.knots[i][static_cast<std::size_t>(cand)] - xs[i]);
                if (d < best_d) {
                    best_d = d;
                    t = cand;
                }
            }
            left.hi_cell[i] = static_cast<std::int16_t>(t - 1);
            right.lo_cell[i] = static_cast<std::int16_t>(t);
            dive_left = xs[i] <= mo.knots[i][static_cast<std::size_t>(t)];
        }
        NodeState& far = dive_left ? right : left;
        far.basis = eng.basis();
        far.at_upper = eng.upper_flags();
        open.push(std::move(far));
        dive = dive_left ? std::move(left) : std::move(right);
    }

    OracleResult res;
    res.nodes = processed;
    res.value = inc_val;
    res.x = inc_x;
    res.bound = std::min(inc_val, worst_floor);
    res.gap = std::max(0.0, inc_val - res.bound);
    std::vector<PoolEntry> keep;
    for (auto& e : pool)
        if (e.val <= inc_val + pool_slack) keep.push_back(std::move(e));
    std::sort(keep.begin(), keep.end(), [](const PoolEntry& a, const PoolEntry& b) {
        if (a.val != b.val) return a.val < b.val;
        return a.x < b.x;
    });
    if (keep.size() > 32) keep.resize(32);
    for (std::size_t t = 0; t < keep.size(); ++t)
        if (keep[t].x == inc_x) {
            std::rotate(keep.begin(), keep.begin() + static_cast<std::ptrdiff_t>(t),
                        keep.begin() + static_cast<std::ptrdiff_t>(t) + 1);
            break;
        }
    for (auto& e : keep) res.pool.push_back(std::move(e.x));
    return res;
}

GridResult grid_oracle(const CPWACost& f, const std::vector<TestBasis>& bases,
                       const DualVector& y, double h, std::uint64_t point_cap) {
    check_shapes(f, bases, y);
    if (!(h > 0.0)) throw DomainError("grid oracle: spacing must be positive");
    const std::size_t n = bases.size();
    std::vector<std::vector<double>> coords(n), yterm(n);
    std::uint64_t total = 1;
    for (std::size_t i = 0; i < n; ++i) {
        const double lo = bases[i].cover().lo();
        const double hi = bases[i].cover().hi();
        const auto steps = static_cast<std::uint64_t>(std::ceil((hi - lo) / h - 1e-12));
        if (total > point_cap / (steps + 1))
            throw BudgetError("grid oracle: point budget exhausted");
        total *= steps + 1;
        for (std::uint64_t k = 0; k < steps; ++k)
            coords[i].push_back(lo + static_cast<double>(k) * h);
        coords[i].push_back(hi);
        const auto& knots = bases[i].cover().knots;
        for (double t : coords[i]) yterm[i].push_back(hat_sum(knots, y.y[i], t));
    }

    GridResult res;
    res.value = kInf;
    std::vector<std::size_t> arg(n, 0);
    scan_product(f, coords, yterm, [&](double v, const std::vector<std::size_t>& idx) {
        if (v < res.value) {
            res.value = v;
            arg = idx;
        }
    });
    res.x.resize(n);
    for (std::size_t i = 0; i < n; ++i) res.x[i] = coords[i][arg[i]];

    double l_total = lipschitz_l1(f).l_f;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 1; j <= bases[i].size(); ++j)
            l_total += std::abs(y.y[i][j - 1]) * bases[i].hat_lipschitz(j);
    res.certificate = l_total * h * static_cast<double>(n) / 2.0;
    return res;
}

OracleResult enumerate_oracle(const CPWACost& f, const std::vector<TestBasis>& bases,
                              const DualVector& y,
                              const std::vector<std::vector<double>>& points,
                              double pool_slack, std::uint64_t point_cap) {
    check_shapes(f, bases, y);
    const std::size_t n = bases.size();
    if (points.size() != n) throw DomainError("oracle: point list count mismatch");
    std::uint64_t total = 1;
    std::vector<std::vector<double>> yterm(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (points[i].empty()) throw DomainError("oracle: empty point list");
        if (total > point_cap / points[i].size())
            throw BudgetError("enumeration: point budget exhausted");
        total *= points[i].size();
        const auto& knots = bases[i].cover().knots;
        for (double t : points[i]) yterm[i].push_back(hat_sum(knots, y.y[i], t));
    }

    OracleResult res;
    res.value = kInf;
    struct Entry {
        double val;
        std::vector<std::size_t> idx;
    };
    std::vector<Entry> near;
    scan_product(f, points, yterm, [&](double v, const std::vector<std::size_t>& idx) {
        if (v < res.value) res.value = v;
        if (v <= res.value + pool_slack) {
            near.push_back({v, idx});
            if (near.size() > 128) {
                std::vector<Entry> kept;
                for (auto& e : near)
                    if (e.val <= res.value + pool_slack) kept.push_back(std::move(e));
                if (kept.size() > 128) {
                    std::stable_sort(kept.begin(), kept.end(),
                                     [](const Entry& a, const Entry& b) { return a.val < b.val; });
                    kept.resize(64);
                }
                near = std::move(kept);
            }
        }
    });

    std::vector<Entry> keep;
    for (auto& e : near)
        if (e.val <= res.value + pool_slack) keep.push_back(std::move(e));
    std::stable_sort(keep.begin(), keep.end(), [](const Entry& a, const Entry& b) {
        if (a.val != b.val) return a.val < b.val;
        return a.idx < b.idx;
    });
    if (keep.size() > 32) keep.resize(32);
    for (const auto& e : keep) {
        std::vector<double> pt(n);
        for (std::size_t i = 0; i < n; ++i) pt[i] = points[i][e.idx[i]];
        res.pool.push_back(std::move(pt));
    }
    res.x = res.pool.front();
    res.bound = res.value;
    res.gap = 0.0;
    res.nodes = static_cast<long>(total);
    return res;
}

}  // namespace mmot
