#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "mmot/cost.hpp"
#include "mmot/errors.hpp"
#include "mmot/marginal.hpp"
#include "mmot/measure.hpp"
#include "mmot/reassembly.hpp"
#include "mmot/rng.hpp"

using mmot::DiscreteMeasure;
using mmot::Marginal1D;

namespace {

DiscreteMeasure measure_of(std::vector<std::vector<double>> pts, std::vector<double> w) {
    DiscreteMeasure mu;
    mu.points = std::move(pts);
    mu.weights = std::move(w);
    return mu;
}

// Two-sided Kolmogorov-Smirnov statistic against a continuous law.
double ks_stat(std::vector<double> xs, const Marginal1D& m) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double cdf = m.cdf(xs[i]);
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - cdf));
        d = std::max(d, std::abs(static_cast<double>(i) / n - cdf));
    }
    return d;
}

// Sorted merged projection of a measure onto coordinate i.
void project(const DiscreteMeasure& mu, std::size_t i, std::vector<double>& atoms,
             std::vector<double>& weights) {
    std::map<double, double> acc;
    for (std::size_t k = 0; k < mu.size(); ++k) acc[mu.points[k][i]] += mu.weights[k];
    atoms.clear();
    weights.clear();
    for (const auto& [a, w] : acc) {
        atoms.push_back(a);
        weights.push_back(w);
    }
}

}  // namespace

TEST_CASE("single atom passes the marginals through") {
    const auto mu = measure_of({{0.2, 0.8}}, {1.0});
    const std::vector<Marginal1D> marg = {Marginal1D::uniform(0.0, 1.0),
                                          Marginal1D::uniform(0.0, 1.0)};
    const auto s = mmot::build_sampler(mu, marg);
    CHECK(s.q_lo[0][0] == 0.0);
    CHECK(s.q_hi[0][0] == 1.0);
    CHECK(s.q_lo[1][0] == 0.0);
    CHECK(s.q_hi[1][0] == 1.0);

    auto rng = mmot::Rng::stream(11, 0, 0);
    std::vector<double> x, y;
    double mean0 = 0.0, mean1 = 0.0;
    const int n = 20000;
    for (int t = 0; t < n; ++t) {
        s.sample(rng, x, y);
        CHECK(x[0] == 0.2);
        CHECK(x[1] == 0.8);
        mean0 += y[0];
        mean1 += y[1];
    }
    // Uniform mean 0.5, sd of the average 1/sqrt(12 n).
    const double tol = 5.0 / std::sqrt(12.0 * n);
    CHECK(std::abs(mean0 / n - 0.5) < tol);
    CHECK(std::abs(mean1 / n - 0.5) < tol);
}

TEST_CASE("quantile intervals follow sorted cumulative weights") {
    const auto mu = measure_of({{0.8}, {0.2}}, {0.5, 0.5});
    const auto s = mmot::build_sampler(mu, {Marginal1D::uniform(0.0, 1.0)});
    CHECK(s.q_lo[0][0] == 0.5);  // atom 0.8 owns the upper half
    CHECK(s.q_hi[0][0] == 1.0);
    CHECK(s.q_lo[0][1] == 0.0);
    CHECK(s.q_hi[0][1] == 0.5);

    auto rng = mmot::Rng::stream(12, 0, 0);
    std::vector<double> x, y;
    double low_mean = 0.0;
    int low_count = 0;
    for (int t = 0; t < 20000; ++t) {
        s.sample(rng, x, y);
        if (x[0] == 0.2) {
            CHECK(y[0] <= 0.5);
            low_mean += y[0];
            ++low_count;
        } else {
            CHECK(y[0] >= 0.5);
        }
    }
    CHECK(low_count > 9000);
    CHECK(std::abs(low_mean / low_count - 0.25) < 0.01);
}

TEST_CASE("identical discrete targets give the identity map") {
    const auto mu = measure_of({{0.0, 0.0}, {1.0, 1.0}}, {0.5, 0.5});
    const std::vector<Marginal1D> marg = {Marginal1D::discrete({0.0, 1.0}, {0.5, 0.5}),
                                          Marginal1D::discrete({0.0, 1.0}, {0.5, 0.5})};
    const auto s = mmot::build_sampler(mu, marg);
    auto rng = mmot::Rng::stream(13, 0, 0);
    std::vector<double> x, y;
    for (int t = 0; t < 1000; ++t) {
        s.sample(rng, x, y);
        CHECK(x == y);
    }

    const auto exact = mmot::reassemble_discrete_exact(mu, marg);
    REQUIRE(exact.size() == 2);
    CHECK(exact.points == mu.points);
    CHECK(exact.weights[0] == 0.5);
    CHECK(exact.weights[1] == 0.5);
}

TEST_CASE("merged duplicate coordinates share one interval") {
    const auto mu = measure_of({{0.5, 0.0}, {0.5, 1.0}}, {0.3, 0.7});
    const auto s = mmot::build_sampler(
        mu, {Marginal1D::uniform(0.0, 1.0), Marginal1D::uniform(0.0, 1.0)});
    CHECK(s.q_lo[0][0] == 0.0);
    CHECK(s.q_hi[0][0] == 1.0);
    CHECK(s.q_lo[0][1] == 0.0);
    CHECK(s.q_hi[0][1] == 1.0);
    CHECK(s.q_lo[1][0] == 0.0);
    CHECK(s.q_hi[1][0] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(s.q_lo[1][1] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(s.q_hi[1][1] == 1.0);
}

TEST_CASE("sampled marginals pass distribution checks") {
    const auto mu = measure_of({{0.1, -0.8}, {0.4, 0.3}, {0.9, 0.6}}, {0.3, 0.45, 0.25});
    const std::vector<Marginal1D> marg = {
        Marginal1D::uniform(0.0, 1.0),
        Marginal1D::truncated_gaussian_mixture({0.6, 0.4}, {-0.3, 0.5}, {0.4, 0.25}, -1.0,
                                               1.0)};
    const auto s = mmot::build_sampler(mu, marg);

    const int n = 100000;
    auto rng = mmot::Rng::stream(14, 0, 0);
    std::vector<double> x, y;
    std::vector<std::vector<double>> draws(2);
    std::vector<double> dev_mean(2, 0.0), dev_sq(2, 0.0);
    for (int t = 0; t < n; ++t) {
        s.sample(rng, x, y);
        for (std::size_t i = 0; i < 2; ++i) {
            draws[i].push_back(y[i]);
            const double d = std::abs(x[i] - y[i]);
            dev_mean[i] += d;
            dev_sq[i] += d * d;
        }
    }

    // Kolmogorov-Smirnov acceptance threshold at significance 1e-3.
    const double ks_threshold = std::sqrt(std::log(2.0 / 1e-3) / 2.0) / std::sqrt(n);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(ks_stat(draws[i], marg[i]) < ks_threshold);

        // The per-coordinate coupling is comonotone, so the mean transport
        // distance equals the exact 1-Wasserstein distance of the projection.
        std::vector<double> atoms, weights;
        project(mu, i, atoms, weights);
        const double exact = mmot::w1_discrete_vs_marginal(atoms, weights, marg[i]);
        const double mean = dev_mean[i] / n;
        const double var = dev_sq[i] / n - mean * mean;
        const double se = std::sqrt(var / n);
        CHECK(std::abs(mean - exact) <= 4.0 * se + 1e-12);
    }
}

TEST_CASE("w1 against closed forms") {
    const auto uni = Marginal1D::uniform(0.0, 1.0);
    CHECK(mmot::w1_discrete_vs_marginal({0.2, 0.8}, {0.5, 0.5}, uni) ==
          doctest::Approx(0.13).epsilon(1e-12));
    CHECK(mmot::w1_discrete_vs_marginal({0.5}, {1.0}, uni) ==
          doctest::Approx(0.25).epsilon(1e-12));
    CHECK(mmot::w1_discrete_vs_marginal({0.25, 0.75}, {0.5, 0.5}, uni) ==
          doctest::Approx(0.125).epsilon(1e-12));

    const auto disc = Marginal1D::discrete({-1.0, 0.5, 2.0}, {0.2, 0.5, 0.3});
    CHECK(mmot::w1_discrete_vs_marginal({-1.0, 0.5, 2.0}, {0.2, 0.5, 0.3}, disc) <= 1e-15);
    // Shifting the middle atom by 0.1 moves 0.5 mass by 0.1.
    CHECK(mmot::w1_discrete_vs_marginal({-1.0, 0.6, 2.0}, {0.2, 0.5, 0.3}, disc) ==
          doctest::Approx(0.05).epsilon(1e-12));

    CHECK_THROWS_AS(mmot::w1_discrete_vs_marginal({0.8, 0.2}, {0.5, 0.5}, uni),
                    mmot::DomainError);
    CHECK_THROWS_AS(mmot::w1_discrete_vs_marginal({0.2, 0.8}, {0.5, 0.4}, uni),
                    mmot::DomainError);
    CHECK_THROWS_AS(mmot::w1_discrete_vs_marginal({}, {}, uni), mmot::DomainError);
}

TEST_CASE("upper bound estimator is deterministic and honest") {
    mmot::CPWACost con;
    con.pos_blocks = {{{{0.0, 0.0}, 2.5}}};
    con.box.lo = {0.0, 0.0};
    con.box.hi = {1.0, 1.0};
    const auto mu = measure_of({{0.2, 0.8}}, {1.0});
    const std::vector<Marginal1D> marg = {Marginal1D::uniform(0.0, 1.0),
                                          Marginal1D::uniform(0.0, 1.0)};
    const auto s = mmot::build_sampler(mu, marg);

    const auto c_est = mmot::estimate_upper_bound(con, s, 500, 8, 99);
    CHECK(c_est.mean == 2.5);
    CHECK(c_est.std_error == 0.0);
    CHECK(c_est.ci_lo == 2.5);
    CHECK(c_est.ucb(3.090232306167813) == 2.5);

    mmot::CPWACost lin;
    lin.pos_blocks = {{{{1.0}, 0.0}}};
    lin.box.lo = {0.0};
    lin.box.hi = {1.0};
    const auto mu1 = measure_of({{0.5}}, {1.0});
    const auto s1 = mmot::build_sampler(mu1, {Marginal1D::uniform(0.0, 1.0)});
    const auto est = mmot::estimate_upper_bound(lin, s1, 2000, 16, 7);
    CHECK(std::abs(est.mean - 0.5) <= 5.0 * est.std_error);
    CHECK(est.ci_hi - est.ci_lo == doctest::Approx(2 * 1.96 * est.std_error));

    // Same seed, any thread count: bitwise identical. New seed: new draws.
    const auto again = mmot::estimate_upper_bound(lin, s1, 2000, 16, 7);
    const auto threaded = mmot::estimate_upper_bound(lin, s1, 2000, 16, 7, 4);
    CHECK(again.mean == est.mean);
    CHECK(again.std_error == est.std_error);
    CHECK(threaded.mean == est.mean);
    CHECK(threaded.std_error == est.std_error);
    CHECK(mmot::estimate_upper_bound(lin, s1, 2000, 16, 8).mean != est.mean);

    CHECK_THROWS_AS(mmot::estimate_upper_bound(lin, s1, 0, 1, 7), mmot::DomainError);
    CHECK_THROWS_AS(mmot::estimate_upper_bound(lin, s1, 1, 0, 7), mmot::DomainError);
}

TEST_CASE("discrete exact reassembly intersects intervals") {
    // Monotone rematch of two atoms onto two different atoms.
    const auto rematch = mmot::reassemble_discrete_exact(
        measure_of({{0.1}, {0.9}}, {0.4, 0.6}),
        {Marginal1D::discrete({0.3, 0.7}, {0.4, 0.6})});
    REQUIRE(rematch.size() == 2);
    CHECK(rematch.points[0][0] == 0.3);
    CHECK(rematch.weights[0] == 0.4);
    CHECK(rematch.points[1][0] == 0.7);
    CHECK(rematch.weights[1] == 0.6);

    // With one marginal the output is that marginal, whatever the input.
    const auto collapse = mmot::reassemble_discrete_exact(
        measure_of({{0.5}}, {1.0}), {Marginal1D::discrete({0.0, 1.0}, {0.3, 0.7})});
    REQUIRE(collapse.size() == 2);
    CHECK(collapse.points[0][0] == 0.0);
    CHECK(collapse.weights[0] == 0.3);
    CHECK(collapse.weights[1] == 0.7);

    CHECK_THROWS_AS(mmot::reassemble_discrete_exact(measure_of({{0.5}}, {1.0}),
                                                    {Marginal1D::uniform(0.0, 1.0)}),
                    mmot::DomainError);
}

TEST_CASE("exact reassembly agrees with the sampler") {
    const auto mu = measure_of({{0.2, 0.0}, {0.7, 1.5}}, {0.5, 0.5});
    const std::vector<Marginal1D> marg = {Marginal1D::discrete({0.0, 1.0}, {0.5, 0.5}),
                                          Marginal1D::discrete({0.0, 2.0}, {0.25, 0.75})};
    const auto exact = mmot::reassemble_discrete_exact(mu, marg);
    REQUIRE(exact.size() == 3);
    CHECK(exact.points[0] == std::vector<double>{0.0, 0.0});
    CHECK(exact.weights[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(exact.points[1] == std::vector<double>{0.0, 2.0});
    CHECK(exact.weights[1] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(exact.points[2] == std::vector<double>{1.0, 2.0});
    CHECK(exact.weights[2] == doctest::Approx(0.5).epsilon(1e-15));

    // Marginals of the reassembly are the targets, exactly.
    for (std::size_t i = 0; i < 2; ++i) {
        std::vector<double> atoms, weights;
        project(exact, i, atoms, weights);
        const auto& law = marg[i].as_discrete();
        CHECK(atoms == law.atoms);
        REQUIRE(weights.size() == law.weights.size());
        for (std::size_t j = 0; j < weights.size(); ++j)
            CHECK(weights[j] == doctest::Approx(law.weights[j]).epsilon(1e-14));
    }

    // Monte Carlo over the same coupling lands within 4 standard errors.
    const auto f = mmot::random_instance(2, 2, 1, 321, mmot::Box{{0.0, 0.0}, {1.0, 2.0}},
                                         -2.0, 2.0);
    double exact_cost = 0.0;
    for (std::size_t k = 0; k < exact.size(); ++k)
        exact_cost += exact.weights[k] * f.eval(exact.points[k]);
    const auto est = mmot::estimate_upper_bound(f, mmot::build_sampler(mu, marg), 4000, 12, 5);
    CHECK(std::abs(est.mean - exact_cost) <= 4.0 * est.std_error + 1e-12);
}

TEST_CASE("sampler validates inputs") {
    auto bad = measure_of({{0.5}}, {0.9});
    CHECK_THROWS_AS(mmot::build_sampler(bad, {Marginal1D::uniform(0.0, 1.0)}),
                    mmot::DomainError);
    const auto mu = measure_of({{0.5, 0.5}}, {1.0});
    CHECK_THROWS_AS(mmot::build_sampler(mu, {Marginal1D::uniform(0.0, 1.0)}),
                    mmot::DomainError);
}
