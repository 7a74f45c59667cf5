#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mmot/cost.hpp"
#include "mmot/cover.hpp"
#include "mmot/cutting_plane.hpp"
#include "mmot/json.hpp"
#include "mmot/marginal.hpp"
#include "mmot/reassembly.hpp"

namespace mmot {

// Random-cost recipe handed to random_instance: block counts, seed and the
// coefficient range of the affine pieces.
struct GeneratorSpec {
    std::size_t k_pos = 1;
    std::size_t k_neg = 0;
    std::uint64_t seed = 0;
    double coeff_lo = -5.0;
    double coeff_hi = 5.0;
};

// Full problem description. Exactly one of `cost` / `generator` is set; the
// cover is either a cell count per marginal or explicit knot grids spanning
// the marginal supports.
struct ProblemConfig {
    std::vector<Marginal1D> marginals;
    std::vector<std::size_t> cover_cells;         // used when cover_knots is empty
    std::vector<std::vector<double>> cover_knots; // explicit grids, one per marginal
    bool greedy = false;                          // mass-weighted greedy refinement
    std::optional<CPWACost> cost;                 // blocks only; box comes from supports
    std::optional<GeneratorSpec> generator;
    double eps_lsip = 1e-4;
    long mc_n = 1000000;
    long mc_reps = 1000;
    std::uint64_t mc_seed = 0;
    long max_cuts = 100000;

    std::size_t dims() const { return marginals.size(); }

    // Canonical JSON round-trip: parse(serialize(cfg)) reproduces cfg and
    // serialize(parse(doc)) reproduces a canonical doc. Throws DomainError on
    // missing or inconsistent sections.
    static ProblemConfig parse(const Json& doc);
    Json serialize() const;
};

// Bound summary of one end-to-end solve. alpha_lb is the certified lower
// bound; alpha_ub the Monte Carlo point estimate of the reassembled coupling
// cost, with its standard error, 95% half-width and one-sided 99.9% upper
// confidence bound. eps_sub = alpha_ub - alpha_lb as recorded; eps_theo is
// the a-priori budget eps_lsip + l_f * sum_i radii[i].
struct BoundsReport {
    double alpha_lb = 0.0;
    double alpha_ub = 0.0;
    double ub_std_error = 0.0;
    double ub_ci95 = 0.0;
    double ub_ucb999 = 0.0;
    double eps_sub = 0.0;
    double eps_theo = 0.0;
    double relax_lb = 0.0;
    double relax_ub = 0.0;
    double relax_gap = 0.0;
    double l_f = 0.0;
    std::vector<double> radii;  // 2 * mesh per marginal
    std::vector<double> w1;     // exact W1(projection of mu_hat, marginal)
    long lsip_iterations = 0;
    long cuts = 0;
    bool lsip_converged = true;
    double seconds_lsip = 0.0;
    double seconds_mc = 0.0;
    double seconds_total = 0.0;

    Json to_json() const;  // stable key order
};

// Everything a caller might inspect after a solve; solve_mmot returns just
// the report.
struct SolveArtifacts {
    BoundsReport report;
    CPWACost cost;
    std::vector<Cover1D> covers;
    LsipResult lsip;
};

SolveArtifacts solve_mmot_full(const ProblemConfig& cfg, unsigned threads = 1);
BoundsReport solve_mmot(const ProblemConfig& cfg, unsigned threads = 1);

// The covers and cost a solve would use, validated but without solving.
// Handy for inspecting radii or Lipschitz constants up front.
std::vector<Cover1D> build_covers(const ProblemConfig& cfg);
CPWACost build_cost(const ProblemConfig& cfg);

// One report per knot count (cells = knots - 1), reusing refined covers
// incrementally so successive grids are nested. Counts must be strictly
// increasing and at least 2.
struct SweepRow {
    std::size_t knots = 0;
    BoundsReport report;
};
std::vector<SweepRow> sweep_knots(const ProblemConfig& cfg,
                                  const std::vector<std::size_t>& knot_counts,
                                  unsigned threads = 1);

// Header "knots,alpha_lb,alpha_ub,ub_ci95,eps_sub,eps_theo,iters,seconds"
// plus one row per sweep entry.
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

// A-priori sub-optimality budget eps_lsip + l_f * sum_i 2 * mesh(cover_i).
double theo_budget(double l_f, const std::vector<Cover1D>& covers, double eps_lsip);

}  // namespace mmot
