#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "mmot/driver.hpp"
#include "mmot/errors.hpp"
#include "mmot/lp.hpp"
#include "mmot/reassembly.hpp"
#include "mmot/rng.hpp"

using mmot::BoundsReport;
using mmot::Cover1D;
using mmot::CPWACost;
using mmot::Json;
using mmot::Marginal1D;
using mmot::ProblemConfig;

namespace {

ProblemConfig base_config() {
    ProblemConfig cfg;
    cfg.marginals = {Marginal1D::uniform(0.0, 1.0), Marginal1D::uniform(0.0, 1.0)};
    cfg.cover_cells = {4, 4};
    mmot::GeneratorSpec gen;
    gen.k_pos = 2;
    gen.k_neg = 1;
    gen.seed = 3;
    cfg.generator = gen;
    cfg.eps_lsip = 1e-4;
    cfg.mc_n = 5000;
    cfg.mc_reps = 8;
    cfg.mc_seed = 17;
    return cfg;
}

}  // namespace

TEST_CASE("config round-trips through json") {
    ProblemConfig cfg = base_config();
    cfg.greedy = true;
    cfg.max_cuts = 5000;
    const Json doc = cfg.serialize();
    const ProblemConfig back = ProblemConfig::parse(doc);
    CHECK(back.serialize() == doc);

    const Json doc2 = Json::parse(R"({
        "marginals": [
            {"type": "uniform", "a": 0.0, "b": 1.0},
            {"type": "discrete", "atoms": [0.0, 0.25, 1.0], "weights": [0.2, 0.5, 0.3]}
        ],
        "cover": {"cells": 6},
        "cost": {"generator": {"k_pos": 1, "k_neg": 1, "seed": 9}},
        "eps_lsip": 0.001,
        "mc": {"n": 1000, "reps": 4, "seed": 2}
    })");
    const ProblemConfig c2 = ProblemConfig::parse(doc2);
    CHECK(c2.dims() == 2);
    CHECK(c2.cover_cells == std::vector<std::size_t>{6, 6});
    CHECK(c2.generator.has_value());
    CHECK(c2.eps_lsip == 0.001);
    CHECK(c2.max_cuts == 100000);
    CHECK(ProblemConfig::parse(c2.serialize()).serialize() == c2.serialize());
}

TEST_CASE("config validation rejects inconsistent sections") {
    ProblemConfig cfg = base_config();
    Json doc = cfg.serialize();
    doc["n"] = 3;
    CHECK_THROWS_AS(ProblemConfig::parse(doc), mmot::DomainError);

    doc = cfg.serialize();
    doc["cover"].erase("cells");
    CHECK_THROWS_AS(ProblemConfig::parse(doc), mmot::DomainError);

    doc = cfg.serialize();
    doc["cost"]["blocks"] = Json::object();
    CHECK_THROWS_AS(ProblemConfig::parse(doc), mmot::DomainError);

    doc = cfg.serialize();
    doc["eps_lsip"] = 0.0;
    CHECK_THROWS_AS(ProblemConfig::parse(doc), mmot::DomainError);

    ProblemConfig bad = base_config();
    bad.generator.reset();
    CHECK_THROWS_AS(mmot::solve_mmot(bad), mmot::DomainError);

    bad = base_config();
    bad.cover_cells = {4};
    CHECK_THROWS_AS(mmot::solve_mmot(bad), mmot::DomainError);
}

TEST_CASE("one-marginal solve pins the mean") {
    ProblemConfig cfg;
    cfg.marginals = {Marginal1D::uniform(0.0, 1.0)};
    cfg.cover_knots = {{0.0, 0.5, 1.0}};
    CPWACost f;
    f.pos_blocks = {{{{1.0}, 0.0}}};
    f.box.lo = {0.0};
    f.box.hi = {1.0};
    cfg.cost = f;
    cfg.eps_lsip = 1e-4;
    cfg.mc_n = 20000;
    cfg.mc_reps = 12;
    cfg.mc_seed = 5;

    const BoundsReport rep = mmot::solve_mmot(cfg);
    CHECK(rep.lsip_converged);
    CHECK(rep.relax_gap <= 1e-4 + 1e-12);
    CHECK(rep.alpha_lb <= 0.5 + 1e-9);
    CHECK(rep.alpha_lb >= 0.5 - 1e-4 - 1e-9);
    CHECK(std::abs(rep.alpha_ub - 0.5) <= 5.0 * rep.ub_std_error + 1e-6);
    CHECK(rep.eps_sub <= rep.eps_theo);
    CHECK(rep.alpha_lb <= rep.alpha_ub + rep.ub_ci95);

    // Report keys come out in a fixed order.
    const Json j = rep.to_json();
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    const std::vector<std::string> expected = {
        "alpha_lb",   "alpha_ub", "ub_std_error", "ub_ci95",        "ub_ucb999",
        "eps_sub",    "eps_theo", "relax_lb",     "relax_ub",       "relax_gap",
        "l_f",        "radii",    "w1",           "lsip_iterations", "cuts",
        "lsip_converged", "seconds_lsip", "seconds_mc", "seconds_total"};
    CHECK(keys == expected);
}

TEST_CASE("separable costs add their integrals") {
    ProblemConfig cfg;
    cfg.marginals = {
        Marginal1D::uniform(-1.0, 1.0),
        Marginal1D::truncated_gaussian_mixture({0.7, 0.3}, {-0.2, 0.4}, {0.5, 0.3}, -1.0,
                                               1.0)};
    cfg.cover_cells = {16, 16};
    CPWACost f;  // |x1| + max(x2, 0.3)
    f.pos_blocks = {{{{1.0, 0.0}, 0.0}, {{-1.0, 0.0}, 0.0}},
                    {{{0.0, 1.0}, 0.0}, {{0.0, 0.0}, 0.3}}};
    f.box.lo = {-1.0, -1.0};
    f.box.hi = {1.0, 1.0};
    cfg.cost = f;
    cfg.eps_lsip = 1e-4;
    cfg.mc_n = 20000;
    cfg.mc_reps = 10;
    cfg.mc_seed = 4;

    const BoundsReport rep = mmot::solve_mmot(cfg);
    const double exact =
        cfg.marginals[0].integrate_piecewise_linear({-1.0, 0.0, 1.0}, {1.0, 0.0, 1.0}) +
        cfg.marginals[1].integrate_piecewise_linear({-1.0, 0.3, 1.0}, {0.3, 0.3, 1.0});
    CHECK(rep.lsip_converged);
    CHECK(rep.alpha_lb <= exact + 1e-9);
    CHECK(exact - rep.alpha_lb <= rep.eps_theo);
    CHECK(std::abs(rep.alpha_ub - exact) <= rep.eps_theo + 4.0 * rep.ub_std_error);
    CHECK(rep.ub_ucb999 - rep.alpha_lb <= rep.eps_theo);
    for (std::size_t i = 0; i < 2; ++i) CHECK(rep.w1[i] <= rep.radii[i] + 1e-12);
}

TEST_CASE("discrete sandwich brackets the grid optimum") {
    const std::vector<double> atoms1 = {-1.0, 0.0, 1.0};
    const std::vector<double> atoms2 = {-1.0, -0.2, 1.0};
    const std::vector<double> w1 = {0.3, 0.4, 0.3};
    const std::vector<double> w2 = {0.25, 0.35, 0.4};
    ProblemConfig cfg;
    cfg.marginals = {Marginal1D::discrete(atoms1, w1), Marginal1D::discrete(atoms2, w2)};
    cfg.cover_knots = {atoms1, atoms2};
    mmot::GeneratorSpec gen;
    gen.k_pos = 2;
    gen.k_neg = 1;
    gen.seed = 11;
    cfg.generator = gen;
    cfg.eps_lsip = 1e-4;
    cfg.mc_n = 20000;
    cfg.mc_reps = 10;
    cfg.mc_seed = 8;

    const auto art = mmot::solve_mmot_full(cfg);
    const BoundsReport& rep = art.report;
    REQUIRE(rep.lsip_converged);

    mmot::LPProblem lp;
    lp.c.resize(9);
    lp.a_eq.assign(6, std::vector<double>(9, 0.0));
    lp.b_eq = {0.3, 0.4, 0.3, 0.25, 0.35, 0.4};
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 3; ++b) {
            lp.c[a * 3 + b] = art.cost.eval({atoms1[a], atoms2[b]});
            lp.a_eq[a][a * 3 + b] = 1.0;
            lp.a_eq[3 + b][a * 3 + b] = 1.0;
        }
    }
    const auto grid = mmot::solve(lp);
    REQUIRE(grid.status == mmot::LPStatus::Optimal);

    CHECK(rep.alpha_lb <= grid.objective + 1e-9);
    CHECK(grid.objective - rep.alpha_lb <= 1e-4 + 1e-8);
    CHECK(grid.objective <= rep.ub_ucb999 + 1e-9);

    // With discrete marginals the reassembled cost is exactly computable and
    // must dominate the optimum; Monte Carlo agrees within noise.
    const auto exact = mmot::reassemble_discrete_exact(art.lsip.mu_hat, cfg.marginals);
    double exact_cost = 0.0;
    for (std::size_t k = 0; k < exact.size(); ++k)
        exact_cost += exact.weights[k] * art.cost.eval(exact.points[k]);
    CHECK(exact_cost >= grid.objective - 1e-9);
    CHECK(std::abs(rep.alpha_ub - exact_cost) <= 5.0 * rep.ub_std_error + 1e-9);
}

TEST_CASE("knot sweep tightens the lower bound") {
    ProblemConfig cfg = base_config();
    const auto rows = mmot::sweep_knots(cfg, {5, 9, 17});
    REQUIRE(rows.size() == 3);
    for (std::size_t t = 0; t < rows.size(); ++t) {
        CHECK(rows[t].report.lsip_converged);
        CHECK(rows[t].report.eps_sub <= rows[t].report.eps_theo);
        if (t > 0) {
            // Doubling uniform grids nest, so the bound cannot drop by more
            // than the two termination tolerances.
            CHECK(rows[t].report.alpha_lb >=
                  rows[t - 1].report.alpha_lb - 2.0 * cfg.eps_lsip);
            CHECK(rows[t].report.eps_theo < rows[t - 1].report.eps_theo);
        }
    }

    std::ostringstream csv;
    mmot::write_sweep_csv(csv, rows);
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "knots,alpha_lb,alpha_ub,ub_ci95,eps_sub,eps_theo,iters,seconds");
    int data_lines = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        CHECK(std::count(line.begin(), line.end(), ',') == 7);
        ++data_lines;
    }
    CHECK(data_lines == 3);

    // A single-entry sweep is just a solve over that grid.
    const auto single = mmot::sweep_knots(cfg, {9});
    ProblemConfig direct = base_config();
    direct.cover_cells = {8, 8};
    CHECK(single[0].report.alpha_lb == mmot::solve_mmot(direct).alpha_lb);

    CHECK_THROWS_AS(mmot::sweep_knots(cfg, {9, 9}), mmot::DomainError);
    CHECK_THROWS_AS(mmot::sweep_knots(cfg, {1, 5}), mmot::DomainError);

    ProblemConfig greedy = base_config();
    greedy.greedy = true;
    const auto grows = mmot::sweep_knots(greedy, {5, 9});
    REQUIRE(grows.size() == 2);
    CHECK(grows[1].report.alpha_lb >= grows[0].report.alpha_lb - 2.0 * cfg.eps_lsip);
}

TEST_CASE("a-priori budget follows the radius formula") {
    const std::vector<Cover1D> three(3, Cover1D::uniform(0.0, 1.0, 10));  // mesh 0.1
    CHECK(mmot::theo_budget(2.0, three, 0.01) == doctest::Approx(1.21).epsilon(1e-14));

    const std::vector<Cover1D> fine(3, Cover1D::uniform(0.0, 1.0, 100000));
    CHECK(mmot::theo_budget(2.0, fine, 0.01) == doctest::Approx(0.01).epsilon(1e-2));

    auto rng = mmot::Rng::stream(77, 0, 0);
    for (int t = 0; t < 20; ++t) {
        const double l_f = rng.uniform(0.1, 5.0);
        const double eps = rng.uniform(1e-6, 1e-2);
        std::vector<Cover1D> covers;
        double expect = eps;
        for (int i = 0; i < 3; ++i) {
            const std::size_t cells = 1 + rng.below(30);
            const double lo = rng.uniform(-5.0, 0.0);
            const double hi = lo + rng.uniform(0.5, 10.0);
            covers.push_back(Cover1D::uniform(lo, hi, cells));
            expect += l_f * 2.0 * covers.back().mesh();
        }
        CHECK(mmot::theo_budget(l_f, covers, eps) ==
              doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("solves are deterministic") {
    const ProblemConfig cfg = base_config();
    const BoundsReport a = mmot::solve_mmot(cfg);
    const BoundsReport b = mmot::solve_mmot(cfg);
    CHECK(a.alpha_lb == b.alpha_lb);
    CHECK(a.alpha_ub == b.alpha_ub);
    CHECK(a.ub_std_error == b.ub_std_error);

    const BoundsReport c = mmot::solve_mmot(cfg, 3);
    CHECK(c.alpha_ub == a.alpha_ub);

    ProblemConfig other = base_config();
    other.mc_seed = 18;
    CHECK(mmot::solve_mmot(other).alpha_ub != a.alpha_ub);
}
