#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "mmot/cost.hpp"
#include "mmot/cover.hpp"
#include "mmot/cutting_plane.hpp"
#include "mmot/errors.hpp"
#include "mmot/lp.hpp"
#include "mmot/marginal.hpp"
#include "mmot/oracle.hpp"
#include "mmot/rng.hpp"

using mmot::Box;
using mmot::CPWACost;
using mmot::Cover1D;
using mmot::DiscreteMeasure;
using mmot::DualVector;
using mmot::Marginal1D;
using mmot::TestBasis;

namespace {

std::vector<TestBasis> make_bases(const std::vector<std::vector<double>>& knots) {
    std::vector<TestBasis> out;
    for (const auto& k : knots) out.emplace_back(Cover1D::from_knots(k));
    return out;
}

Box box_of(const std::vector<std::vector<double>>& knots) {
    Box b;
    for (const auto& k : knots) {
        b.lo.push_back(k.front());
        b.hi.push_back(k.back());
    }
    return b;
}

// Moment targets from vertex masses: drop the left-end entry.
std::vector<std::vector<double>> targets_of(const std::vector<std::vector<double>>& masses) {
    std::vector<std::vector<double>> g(masses.size());
    for (std::size_t i = 0; i < masses.size(); ++i)
        g[i].assign(masses[i].begin() + 1, masses[i].end());
    return g;
}

mmot::OracleFn milp_oracle(const CPWACost& f, const std::vector<TestBasis>& bases,
                           double eps_milp = 1e-9) {
    return [&f, &bases, eps_milp](const DualVector& y) {
        return mmot::solve_bb(mmot::build_milp(f, bases, y), eps_milp);
    };
}

mmot::OracleFn scan_oracle(const CPWACost& f, const std::vector<TestBasis>& bases,
                           const std::vector<std::vector<double>>& points) {
    return [&f, &bases, points](const DualVector& y) {
        return mmot::enumerate_oracle(f, bases, y, points);
    };
}

double dual_objective(const mmot::LsipResult& res,
                      const std::vector<std::vector<double>>& gbar) {
    double v = res.y0_hat;
    for (std::size_t i = 0; i < gbar.size(); ++i)
        for (std::size_t j = 0; j < gbar[i].size(); ++j) v += gbar[i][j] * res.y_hat.y[i][j];
    return v;
}

void check_run_invariants(const mmot::LsipResult& res) {
    REQUIRE(!res.log.empty());
    for (std::size_t k = 0; k < res.log.size(); ++k) {
        const auto& row = res.log[k];
        CHECK(row.r == static_cast<long>(k));
        CHECK(row.gap >= -1e-9);
        CHECK(row.oracle_seconds >= 0.0);
        if (k > 0) {
            CHECK(row.alpha <= res.log[k - 1].alpha + 1e-9);
            CHECK(row.active_size >= res.log[k - 1].active_size);
        }
    }
    CHECK(res.alpha_lb <= res.alpha_ub + 1e-12);
}

}  // namespace

TEST_CASE("initial coupling follows the smallest-remainder trace") {
    const auto out = mmot::init_algorithm0({{0.5, 0.5}, {0.3, 0.7}}, {{0.0, 1.0}, {10.0, 20.0}});
    CHECK(out.flag == 0);
    REQUIRE(out.measure.size() == 3);
    CHECK(out.measure.points[0] == std::vector<double>{0.0, 10.0});
    CHECK(out.measure.weights[0] == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(out.measure.points[1] == std::vector<double>{0.0, 20.0});
    CHECK(out.measure.weights[1] == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(out.measure.points[2] == std::vector<double>{1.0, 20.0});
    CHECK(out.measure.weights[2] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(out.active == out.measure.points);

    const auto one = mmot::init_algorithm0({{0.4, 0.6}}, {{-1.0, 1.0}});
    CHECK(one.flag == 0);
    REQUIRE(one.measure.size() == 2);
    CHECK(one.measure.points[0][0] == -1.0);
    CHECK(one.measure.weights[0] == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(one.measure.points[1][0] == 1.0);
    CHECK(one.measure.weights[1] == doctest::Approx(0.6).epsilon(1e-14));
}

TEST_CASE("initial coupling flags ties and widens the active set") {
    const auto out = mmot::init_algorithm0({{0.5, 0.5}, {0.5, 0.5}}, {{0.0, 1.0}, {10.0, 20.0}});
    CHECK(out.flag == 1);
    REQUIRE(out.measure.size() == 2);
    CHECK(out.measure.points[0] == std::vector<double>{0.0, 10.0});
    CHECK(out.measure.points[1] == std::vector<double>{1.0, 20.0});
    CHECK(out.measure.weights[0] == doctest::Approx(0.5).epsilon(1e-14));

    // The perturbation fallback fills in the other two grid corners.
    REQUIRE(out.active.size() == 4);
    int hits = 0;
    for (const auto& x : out.active) {
        if (x == std::vector<double>{1.0, 10.0} || x == std::vector<double>{0.0, 20.0}) ++hits;
    }
    CHECK(hits == 2);
}

TEST_CASE("initial coupling rejects bad masses") {
    CHECK_THROWS_AS(mmot::init_algorithm0({{0.0, 1.0}}, {{0.0, 1.0}}), mmot::DomainError);
    CHECK_THROWS_AS(mmot::init_algorithm0({{-0.1, 1.1}}, {{0.0, 1.0}}), mmot::DomainError);
    CHECK_THROWS_AS(mmot::init_algorithm0({{0.3, 0.3}}, {{0.0, 1.0}}), mmot::DomainError);
    CHECK_THROWS_AS(mmot::init_algorithm0({{0.5, 0.5}}, {{0.0, 0.5, 1.0}}), mmot::DomainError);
    CHECK_THROWS_AS(mmot::init_algorithm0({}, {}), mmot::DomainError);
}

TEST_CASE("initial coupling is moment-feasible with full support") {
    auto rng = mmot::Rng::stream(31, 0, 0);
    const std::vector<std::vector<double>> knots = {
        {-1.0, 0.0, 1.0}, {-2.0, -0.5, 0.5, 2.0}, {0.0, 0.25, 0.5, 0.75, 1.0}};
    const auto bases = make_bases(knots);
    std::size_t m = 0;
    for (const auto& b : bases) m += b.size();

    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::vector<double>> masses(knots.size());
        for (std::size_t i = 0; i < knots.size(); ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < knots[i].size(); ++j) {
                masses[i].push_back(rng.uniform(0.05, 1.0));
                sum += masses[i].back();
            }
            for (double& q : masses[i]) q /= sum;
        }
        const auto out = mmot::init_algorithm0(masses, knots);
        if (out.flag == 0) CHECK(out.measure.size() == m + 1);
        const auto rep = mmot::verify_moment_feasibility(out.measure, bases, targets_of(masses));
        CHECK(rep.max_residual <= 1e-12);
        CHECK(rep.pass);
    }
}

TEST_CASE("moment check flags a lone vertex and accepts knot products") {
    const std::vector<std::vector<double>> knots = {{0.0, 0.5, 1.0}, {0.0, 1.0}};
    const auto bases = make_bases(knots);
    const std::vector<std::vector<double>> masses = {{0.2, 0.3, 0.5}, {0.4, 0.6}};
    const auto gbar = targets_of(masses);

    DiscreteMeasure lone;
    lone.points = {{0.5, 1.0}};
    lone.weights = {1.0};
    const auto bad = mmot::verify_moment_feasibility(lone, bases, gbar);
    CHECK(!bad.pass);
    CHECK(bad.max_residual > 0.1);

    DiscreteMeasure prod;
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 2; ++b) {
            prod.points.push_back({knots[0][a], knots[1][b]});
            prod.weights.push_back(masses[0][a] * masses[1][b]);
        }
    }
    const auto good = mmot::verify_moment_feasibility(prod, bases, gbar);
    CHECK(good.pass);
    CHECK(good.max_residual <= 1e-12);
}

TEST_CASE("one-marginal linear cost meets the known value") {
    const std::vector<std::vector<double>> knots = {{0.0, 1.0}};
    const auto bases = make_bases(knots);
    CPWACost f;
    f.pos_blocks = {{{{1.0}, 0.0}}};
    f.box = box_of(knots);

    const auto marg = Marginal1D::uniform(0.0, 1.0);
    const auto masses = std::vector<std::vector<double>>{
        mmot::vertex_masses(bases[0].cover(), marg)};
    const auto init = mmot::init_algorithm0(masses, knots);
    const auto res = mmot::run_algorithm1(f, bases, targets_of(masses), init.active,
                                          milp_oracle(f, bases), 1e-6);
    CHECK(res.converged);
    check_run_invariants(res);
    CHECK(res.alpha_ub == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(res.alpha_lb == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(res.alpha_ub - res.alpha_lb <= 1e-6);
    CHECK(res.mu_hat.size() <= 2);
    CHECK(mmot::verify_moment_feasibility(res.mu_hat, bases, targets_of(masses)).pass);
}

TEST_CASE("constant cost closes the gap in one iteration") {
    const std::vector<std::vector<double>> knots = {{0.0, 0.5, 1.0}, {0.0, 0.5, 1.0}};
    const auto bases = make_bases(knots);
    CPWACost f;
    f.pos_blocks = {{{{0.0, 0.0}, 2.5}}};
    f.box = box_of(knots);

    const auto marg = Marginal1D::uniform(0.0, 1.0);
    std::vector<std::vector<double>> masses;
    for (const auto& b : bases) masses.push_back(mmot::vertex_masses(b.cover(), marg));
    const auto init = mmot::init_algorithm0(masses, knots);
    const auto res = mmot::run_algorithm1(f, bases, targets_of(masses), init.active,
                                          milp_oracle(f, bases), 1e-9);
    CHECK(res.converged);
    CHECK(res.log.size() == 1);
    CHECK(res.alpha_ub == doctest::Approx(2.5).epsilon(1e-9));
    CHECK(res.alpha_lb == doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("discrete marginals reproduce the assignment value") {
    const std::vector<std::vector<double>> knots = {{-1.0, -0.2, 0.4, 1.0}, {-1.0, 0.0, 1.0}};
    const auto bases = make_bases(knots);
    const auto f = mmot::random_instance(2, 2, 1, 42, box_of(knots), -2.0, 2.0);
    const auto law1 = Marginal1D::discrete(knots[0], {0.1, 0.2, 0.3, 0.4});
    const auto law2 = Marginal1D::discrete(knots[1], {0.25, 0.4, 0.35});

    std::vector<std::vector<double>> masses = {
        mmot::vertex_masses(bases[0].cover(), law1),
        mmot::vertex_masses(bases[1].cover(), law2)};
    // Hats are a partition of unity pinned at knots, so the vertex masses of a
    // knot-supported law are its weights.
    CHECK(masses[0][2] == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(masses[1][1] == doctest::Approx(0.4).epsilon(1e-14));

    const auto gbar = targets_of(masses);
    const auto init = mmot::init_algorithm0(masses, knots);
    const auto res = mmot::run_algorithm1(f, bases, gbar, init.active,
                                          scan_oracle(f, bases, knots), 1e-8);
    CHECK(res.converged);
    check_run_invariants(res);

    // Direct transport LP over the 4 x 3 grid.
    mmot::LPProblem lp;
    lp.c.resize(12);
    lp.a_eq.assign(7, std::vector<double>(12, 0.0));
    lp.b_eq = {0.1, 0.2, 0.3, 0.4, 0.25, 0.4, 0.35};
    for (std::size_t a = 0; a < 4; ++a) {
        for (std::size_t b = 0; b < 3; ++b) {
            const std::size_t col = a * 3 + b;
            lp.c[col] = f.eval({knots[0][a], knots[1][b]});
            lp.a_eq[a][col] = 1.0;
            lp.a_eq[4 + b][col] = 1.0;
        }
    }
    const auto direct = mmot::solve(lp);
    REQUIRE(direct.status == mmot::LPStatus::Optimal);
    CHECK(res.alpha_ub >= direct.objective - 1e-9);
    CHECK(res.alpha_lb <= direct.objective + 1e-9);
    CHECK(std::abs(res.alpha_ub - direct.objective) <= 1e-7);

    // Exit certificates: dual objective matches the lower bound, the measure
    // is moment-feasible with small support, and a fresh separation call
    // confirms the shifted dual is feasible everywhere.
    CHECK(dual_objective(res, gbar) == doctest::Approx(res.alpha_lb).epsilon(1e-9));
    CHECK(mmot::verify_moment_feasibility(res.mu_hat, bases, gbar).pass);
    std::size_t m = 0;
    for (const auto& b : bases) m += b.size();
    CHECK(res.mu_hat.size() <= m + 2);
    const auto fresh = scan_oracle(f, bases, knots)(res.y_hat);
    CHECK(fresh.bound - res.y0_hat >= -1e-8);
}

TEST_CASE("continuous two-marginal run keeps certified brackets") {
    const std::vector<std::vector<double>> knots = {
        {-1.0, -0.5, 0.0, 0.5, 1.0}, {-1.0, -0.5, 0.0, 0.5, 1.0}};
    const auto bases = make_bases(knots);
    const auto f = mmot::random_instance(2, 2, 2, 777, box_of(knots), -2.0, 2.0);
    const auto marg = Marginal1D::truncated_gaussian_mixture({1.0}, {0.1}, {0.6}, -1.0, 1.0);

    std::vector<std::vector<double>> masses;
    for (const auto& b : bases) masses.push_back(mmot::vertex_masses(b.cover(), marg));
    const auto gbar = targets_of(masses);
    const auto init = mmot::init_algorithm0(masses, knots);
    const auto res =
        mmot::run_algorithm1(f, bases, gbar, init.active, milp_oracle(f, bases), 1e-5);
    CHECK(res.converged);
    check_run_invariants(res);
    CHECK(res.alpha_ub - res.alpha_lb <= 1e-5);

    std::size_t m = 0;
    for (const auto& b : bases) m += b.size();
    CHECK(res.mu_hat.size() <= m + 2);
    CHECK(mmot::verify_moment_feasibility(res.mu_hat, bases, gbar).pass);
    CHECK(dual_objective(res, gbar) == doctest::Approx(res.alpha_lb).epsilon(1e-8));
    const auto fresh = milp_oracle(f, bases)(res.y_hat);
    CHECK(fresh.bound - res.y0_hat >= -1e-8);
}

TEST_CASE("cut budget stops early with honest bounds") {
    const std::vector<std::vector<double>> knots = {{-1.0, -0.2, 0.4, 1.0}, {-1.0, 0.0, 1.0}};
    const auto bases = make_bases(knots);
    const auto f = mmot::random_instance(2, 3, 2, 7, box_of(knots), -3.0, 3.0);
    const auto law1 = Marginal1D::discrete(knots[0], {0.1, 0.2, 0.3, 0.4});
    const auto law2 = Marginal1D::discrete(knots[1], {0.25, 0.4, 0.35});
    std::vector<std::vector<double>> masses = {
        mmot::vertex_masses(bases[0].cover(), law1),
        mmot::vertex_masses(bases[1].cover(), law2)};
    const auto gbar = targets_of(masses);
    const auto init = mmot::init_algorithm0(masses, knots);

    const auto full = mmot::run_algorithm1(f, bases, gbar, init.active,
                                           scan_oracle(f, bases, knots), 1e-8);
    REQUIRE(full.converged);
    const auto cut =
        mmot::run_algorithm1(f, bases, gbar, init.active, scan_oracle(f, bases, knots), 1e-8,
                             /*max_cuts=*/2);
    if (!cut.converged) {
        CHECK(cut.cuts_added <= 2);
        CHECK(cut.alpha_lb <= full.alpha_lb + 1e-9);
        CHECK(cut.alpha_ub >= full.alpha_ub - 1e-9);
        check_run_invariants(cut);
        CHECK(mmot::verify_moment_feasibility(cut.mu_hat, bases, gbar).pass);
    }
}

TEST_CASE("stalled separation raises") {
    const std::vector<std::vector<double>> knots = {{0.0, 1.0}};
    const auto bases = make_bases(knots);
    CPWACost f;
    f.pos_blocks = {{{{1.0}, 0.0}}};
    f.box = box_of(knots);

    mmot::OracleFn stuck = [](const DualVector&) {
        mmot::OracleResult r;
        r.x = {0.0};
        r.value = -10.0;
        r.bound = -10.0;
        r.gap = 0.0;
        r.pool = {{0.0}};
        r.nodes = 1;
        return r;
    };
    CHECK_THROWS_AS(
        mmot::run_algorithm1(f, bases, {{0.5}}, {{0.0}, {1.0}}, stuck, 1e-6),
        mmot::NumericalError);
}

TEST_CASE("cutting plane validates its inputs") {
    const std::vector<std::vector<double>> knots = {{0.0, 1.0}};
    const auto bases = make_bases(knots);
    CPWACost f;
    f.pos_blocks = {{{{1.0}, 0.0}}};
    f.box = box_of(knots);
    const auto oracle = milp_oracle(f, bases);

    CHECK_THROWS_AS(mmot::run_algorithm1(f, bases, {{0.5, 0.5}}, {{0.0}}, oracle, 1e-6),
                    mmot::DomainError);
    CHECK_THROWS_AS(mmot::run_algorithm1(f, bases, {{0.5}}, {}, oracle, 1e-6),
                    mmot::DomainError);
    CHECK_THROWS_AS(mmot::run_algorithm1(f, bases, {{0.5}}, {{0.0}}, oracle, 0.0),
                    mmot::DomainError);

    DiscreteMeasure mu;
    mu.points = {{0.5, 0.5}};
    mu.weights = {1.0};
    CHECK_THROWS_AS(mmot::verify_moment_feasibility(mu, bases, {{0.5}}), mmot::DomainError);
}
