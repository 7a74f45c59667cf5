#include "mmot/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "mmot/errors.hpp"
#include "mmot/oracle.hpp"

namespace mmot {

namespace {

constexpr double kUcb999 = 3.090232306167813;  // one-sided 99.9% normal quantile

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    return dt.count();
}

Box support_box(const std::vector<Marginal1D>& marginals) {
    Box b;
    for (const auto& m : marginals) {
        b.lo.push_back(m.support_lo());
        b.hi.push_back(m.support_hi());
    }
    return b;
}

void check_config(const ProblemConfig& cfg) {
    if (cfg.marginals.empty()) throw DomainError("config: at least one marginal is required");
    if (cfg.cost.has_value() == cfg.generator.has_value())
        throw DomainError("config: exactly one of cost blocks or generator is required");
    if (!(cfg.eps_lsip > 0.0)) throw DomainError("config: eps_lsip must be positive");
    if (cfg.mc_n < 1 || cfg.mc_reps < 1) throw DomainError("config: mc needs n, reps >= 1");
    if (cfg.max_cuts < 1) throw DomainError("config: max_cuts must be positive");
    if (cfg.cover_knots.empty()) {
        if (cfg.cover_cells.size() != cfg.dims())
            throw DomainError("config: one cover cell count per marginal");
        for (std::size_t c : cfg.cover_cells) {
            if (c < 1) throw DomainError("config: cover cells must be positive");
        }
    } else if (cfg.cover_knots.size() != cfg.dims()) {
        throw DomainError("config: one cover knot grid per marginal");
    }
}

std::vector<Cover1D> make_covers(const ProblemConfig& cfg) {
    std::vector<Cover1D> covers;
    for (std::size_t i = 0; i < cfg.dims(); ++i) {
        const double lo = cfg.marginals[i].support_lo();
        const double hi = cfg.marginals[i].support_hi();
        if (!cfg.cover_knots.empty()) {
            Cover1D c = Cover1D::from_knots(cfg.cover_knots[i]);
            const double tol = 1e-9 * (1.0 + std::abs(lo) + std::abs(hi));
            if (std::abs(c.lo() - lo) > tol || std::abs(c.hi() - hi) > tol)
                throw DomainError("config: cover knots must span the marginal support");
            covers.push_back(std::move(c));
        } else if (cfg.greedy) {
            covers.push_back(refine_greedy(Cover1D::from_knots({lo, hi}), cfg.marginals[i],
                                           cfg.cover_cells[i]));
        } else {
            covers.push_back(Cover1D::uniform(lo, hi, cfg.cover_cells[i]));
        }
    }
    return covers;
}

CPWACost make_cost(const ProblemConfig& cfg, const Box& box) {
    if (cfg.cost) {
        if (cfg.cost->box.dims() != cfg.dims())
            throw DomainError("config: cost dimension differs from the marginal count");
        return *cfg.cost;
    }
    const GeneratorSpec& g = *cfg.generator;
    return random_instance(cfg.dims(), g.k_pos, g.k_neg, g.seed, box, g.coeff_lo, g.coeff_hi);
}

SolveArtifacts solve_with_covers(const ProblemConfig& cfg, std::vector<Cover1D> covers,
                                 unsigned threads) {
    const auto t_all = std::chrono::steady_clock::now();
    const std::size_t n = cfg.dims();
    const Box box = support_box(cfg.marginals);
    CPWACost f = make_cost(cfg, box);

    std::vector<TestBasis> bases;
    std::vector<std::vector<double>> masses, knots;
    for (std::size_t i = 0; i < n; ++i) {
        bases.emplace_back(covers[i]);
        masses.push_back(vertex_masses(covers[i], cfg.marginals[i]));
        knots.push_back(covers[i].knots);
    }
    std::vector<std::vector<double>> gbar(n);
    for (std::size_t i = 0; i < n; ++i)
        gbar[i].assign(masses[i].begin() + 1, masses[i].end());

    const auto init = init_algorithm0(masses, knots);

    // All-discrete problems live on the product of the supports, so the
    // separation scan ranges over atoms; otherwise the mixed-integer search
    // covers the whole box.
    const double pool_slack = std::max(10.0 * cfg.eps_lsip, 1e-6);
    const double eps_milp = std::min(1e-8, 0.1 * cfg.eps_lsip);
    bool all_discrete = true;
    for (const auto& m : cfg.marginals) all_discrete = all_discrete && m.is_discrete();
    OracleFn oracle;
    if (all_discrete) {
        std::vector<std::vector<double>> atom_lists;
        for (const auto& m : cfg.marginals) atom_lists.push_back(m.as_discrete().atoms);
        oracle = [&f, &bases, atom_lists, pool_slack](const DualVector& y) {
            return enumerate_oracle(f, bases, y, atom_lists, pool_slack);
        };
    } else {
        oracle = [&f, &bases, eps_milp, pool_slack](const DualVector& y) {
            return solve_bb(build_milp(f, bases, y), eps_milp, pool_slack);
        };
    }

    const auto t_lsip = std::chrono::steady_clock::now();
    SolveArtifacts art;
    art.lsip = run_algorithm1(f, bases, gbar, init.active, oracle, cfg.eps_lsip, cfg.max_cuts);
    BoundsReport& rep = art.report;
    rep.seconds_lsip = seconds_since(t_lsip);

    const auto sampler = build_sampler(art.lsip.mu_hat, cfg.marginals);
    const auto t_mc = std::chrono::steady_clock::now();
    const MCEstimate est =
        estimate_upper_bound(f, sampler, cfg.mc_n, cfg.mc_reps, cfg.mc_seed, threads);
    rep.seconds_mc = seconds_since(t_mc);

    rep.alpha_lb = art.lsip.alpha_lb;
    rep.alpha_ub = est.mean;
    rep.ub_std_error = est.std_error;
    rep.ub_ci95 = 1.96 * est.std_error;
    rep.ub_ucb999 = est.ucb(kUcb999);
    rep.eps_sub = rep.alpha_ub - rep.alpha_lb;
    rep.l_f = lipschitz_l1(f).l_f;
    for (std::size_t i = 0; i < n; ++i) {
        rep.radii.push_back(radius_bound_w1(covers[i]));
        std::vector<double> atoms, weights;
        project_measure(art.lsip.mu_hat, i, atoms, weights);
        rep.w1.push_back(w1_discrete_vs_marginal(atoms, weights, cfg.marginals[i]));
    }
    rep.eps_theo = theo_budget(rep.l_f, covers, cfg.eps_lsip);
    rep.relax_lb = art.lsip.alpha_lb;
    rep.relax_ub = art.lsip.alpha_ub;
    rep.relax_gap = rep.relax_ub - rep.relax_lb;
    rep.lsip_iterations = static_cast<long>(art.lsip.log.size());
    rep.cuts = art.lsip.cuts_added;
    rep.lsip_converged = art.lsip.converged;
    rep.seconds_total = seconds_since(t_all);

    art.cost = std::move(f);
    art.covers = std::move(covers);
    return art;
}

}  // namespace

ProblemConfig ProblemConfig::parse(const Json& doc) {
    try {
        if (!doc.is_object()) throw DomainError("config: expected a JSON object");
        ProblemConfig cfg;
        if (!doc.contains("marginals") || !doc["marginals"].is_array() ||
            doc["marginals"].empty())
            throw DomainError("config: missing marginals");
        for (const Json& d : doc["marginals"]) cfg.marginals.push_back(Marginal1D::parse(d));
        const std::size_t n = cfg.marginals.size();
        if (doc.contains("n") && doc["n"].get<std::size_t>() != n)
            throw DomainError("config: n disagrees with the marginal count");

        const Json& cov = doc.at("cover");
        const bool has_cells = cov.contains("cells");
        const bool has_knots = cov.contains("knots");
        if (has_cells == has_knots)
            throw DomainError("config: cover needs exactly one of cells or knots");
        if (has_cells) {
            if (cov["cells"].is_array()) {
                cfg.cover_cells = cov["cells"].get<std::vector<std::size_t>>();
            } else {
                cfg.cover_cells.assign(n, cov["cells"].get<std::size_t>());
            }
        } else {
            cfg.cover_knots = cov["knots"].get<std::vector<std::vector<double>>>();
        }
        cfg.greedy = cov.value("greedy", false);

        const Json& cost = doc.at("cost");
        const bool has_blocks = cost.contains("blocks");
        const bool has_gen = cost.contains("generator");
        if (has_blocks == has_gen)
            throw DomainError("config: cost needs exactly one of blocks or generator");
        if (has_blocks) {
            cfg.cost = CPWACost::parse(cost["blocks"], support_box(cfg.marginals));
        } else {
            const Json& g = cost["generator"];
            GeneratorSpec spec;
            spec.k_pos = g.value("k_pos", std::size_t{1});
            spec.k_neg = g.value("k_neg", std::size_t{0});
            spec.seed = g.value("seed", std::uint64_t{0});
            spec.coeff_lo = g.value("coeff_lo", -5.0);
            spec.coeff_hi = g.value("coeff_hi", 5.0);
            cfg.generator = spec;
        }

        cfg.eps_lsip = doc.value("eps_lsip", 1e-4);
        if (doc.contains("mc")) {
            const Json& mc = doc["mc"];
            cfg.mc_n = mc.value("n", long{1000000});
            cfg.mc_reps = mc.value("reps", long{1000});
            cfg.mc_seed = mc.value("seed", std::uint64_t{0});
        }
        cfg.max_cuts = doc.value("max_cuts", long{100000});
        check_config(cfg);
        return cfg;
    } catch (const Json::exception& e) {
        throw DomainError(std::string("config: ") + e.what());
    }
}

Json ProblemConfig::serialize() const {
    Json j;
    j["n"] = dims();
    Json margs = Json::array();
    for (const auto& m : marginals) margs.push_back(m.serialize());
    j["marginals"] = std::move(margs);

    Json cov;
    if (!cover_knots.empty()) {
        cov["knots"] = cover_knots;
    } else {
        cov["cells"] = cover_cells;
    }
    cov["greedy"] = greedy;
    j["cover"] = std::move(cov);

    Json cost_j;
    if (cost) {
        cost_j["blocks"] = cost->serialize();
    } else {
        Json g;
        g["k_pos"] = generator->k_pos;
        g["k_neg"] = generator->k_neg;
        g["seed"] = generator->seed;
        g["coeff_lo"] = generator->coeff_lo;
        g["coeff_hi"] = generator->coeff_hi;
        cost_j["generator"] = std::move(g);
    }
    j["cost"] = std::move(cost_j);

    j["eps_lsip"] = eps_lsip;
    Json mc;
    mc["n"] = mc_n;
    mc["reps"] = mc_reps;
    mc["seed"] = mc_seed;
    j["mc"] = std::move(mc);
    j["max_cuts"] = max_cuts;
    return j;
}

Json BoundsReport::to_json() const {
    Json j;
    j["alpha_lb"] = alpha_lb;
    j["alpha_ub"] = alpha_ub;
    j["ub_std_error"] = ub_std_error;
    j["ub_ci95"] = ub_ci95;
    j["ub_ucb999"] = ub_ucb999;
    j["eps_sub"] = eps_sub;
    j["eps_theo"] = eps_theo;
    j["relax_lb"] = relax_lb;
    j["relax_ub"] = relax_ub;
    j["relax_gap"] = relax_gap;
    j["l_f"] = l_f;
    j["radii"] = radii;
    j["w1"] = w1;
    j["lsip_iterations"] = lsip_iterations;
    j["cuts"] = cuts;
    j["lsip_converged"] = lsip_converged;
    j["seconds_lsip"] = seconds_lsip;
    j["seconds_mc"] = seconds_mc;
    j["seconds_total"] = seconds_total;
    return j;
}

SolveArtifacts solve_mmot_full(const ProblemConfig& cfg, unsigned threads) {
    check_config(cfg);
    return solve_with_covers(cfg, make_covers(cfg), threads);
}

BoundsReport solve_mmot(const ProblemConfig& cfg, unsigned threads) {
    return solve_mmot_full(cfg, threads).report;
}

std::vector<Cover1D> build_covers(const ProblemConfig& cfg) {
    check_config(cfg);
    return make_covers(cfg);
}

CPWACost build_cost(const ProblemConfig& cfg) {
    check_config(cfg);
    return make_cost(cfg, support_box(cfg.marginals));
}

std::vector<SweepRow> sweep_knots(const ProblemConfig& cfg,
                                  const std::vector<std::size_t>& knot_counts,
                                  unsigned threads) {
    check_config(cfg);
    if (knot_counts.empty()) throw DomainError("sweep: no knot counts");
    for (std::size_t t = 0; t < knot_counts.size(); ++t) {
        if (knot_counts[t] < 2) throw DomainError("sweep: a cover needs at least 2 knots");
        if (t > 0 && knot_counts[t] <= knot_counts[t - 1])
            throw DomainError("sweep: knot counts must be strictly increasing");
    }
    if (!cfg.cover_knots.empty())
        throw DomainError("sweep: explicit cover knots conflict with a knot sweep");

    std::vector<SweepRow> rows;
    std::vector<Cover1D> covers;
    for (std::size_t knots : knot_counts) {
        const std::size_t cells = knots - 1;
        if (covers.empty() || !cfg.greedy) {
            covers.clear();
            for (const auto& m : cfg.marginals) {
                const Cover1D base = Cover1D::from_knots({m.support_lo(), m.support_hi()});
                covers.push_back(cfg.greedy ? refine_greedy(base, m, cells)
                                            : Cover1D::uniform(m.support_lo(),
                                                               m.support_hi(), cells));
            }
        } else {
            // Greedy grids refine the previous sweep entry, so successive
            // moment sets are nested and the lower bound cannot drift down.
            for (std::size_t i = 0; i < covers.size(); ++i)
                covers[i] = refine_greedy(covers[i], cfg.marginals[i], cells);
        }
        SweepRow row;
        row.knots = knots;
        row.report = solve_with_covers(cfg, covers, threads).report;
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "knots,alpha_lb,alpha_ub,ub_ci95,eps_sub,eps_theo,iters,seconds\n";
    char buf[256];
    for (const auto& row : rows) {
        const BoundsReport& r = row.report;
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%ld,%.3f\n",
                      row.knots, r.alpha_lb, r.alpha_ub, r.ub_ci95, r.eps_sub, r.eps_theo,
                      r.lsip_iterations, r.seconds_total);
        os << buf;
    }
}

double theo_budget(double l_f, const std::vector<Cover1D>& covers, double eps_lsip) {
    double budget = eps_lsip;
    for (const auto& c : covers) budget += l_f * radius_bound_w1(c);
    return budget;
}

}  // namespace mmot
