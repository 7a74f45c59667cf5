// Command-line front end: solve one problem, sweep knot counts, spot-check
// the separation oracle against the grid scan, or print cover radii.

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mmot/cost.hpp"
#include "mmot/cover.hpp"
#include "mmot/driver.hpp"
#include "mmot/errors.hpp"
#include "mmot/oracle.hpp"
#include "mmot/rng.hpp"

namespace {

unsigned env_threads() {
    const char* v = std::getenv("MMOT_THREADS");
    if (v == nullptr) return 1;
    const long parsed = std::strtol(v, nullptr, 10);
    return parsed > 0 ? static_cast<unsigned>(parsed) : 1;
}

mmot::ProblemConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw mmot::DomainError("cannot open config file: " + path);
    return mmot::ProblemConfig::parse(mmot::Json::parse(in));
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw mmot::DomainError("cannot open output file: " + path);
    out << text;
}

int run_solve(const std::string& config_path, const std::string& out_path) {
    const auto cfg = load_config(config_path);
    const mmot::BoundsReport rep = mmot::solve_mmot(cfg, env_threads());
    write_text(out_path, rep.to_json().dump(2) + "\n");
    std::cerr << "alpha_lb = " << rep.alpha_lb << ", alpha_ub = " << rep.alpha_ub
              << ", eps_sub = " << rep.eps_sub << ", eps_theo = " << rep.eps_theo << "\n";
    return 0;
}

int run_sweep(const std::string& config_path, const std::vector<std::size_t>& knots,
              const std::string& out_path) {
    const auto cfg = load_config(config_path);
    const auto rows = mmot::sweep_knots(cfg, knots, env_threads());
    std::ostringstream csv;
    mmot::write_sweep_csv(csv, rows);
    write_text(out_path, csv.str());
    return 0;
}

int run_oracle_check(std::uint64_t seed, int trials) {
    double worst_discrepancy = 0.0;
    double worst_margin = -1.0;  // discrepancy minus allowance; > 0 fails
    for (int t = 0; t < trials; ++t) {
        auto rng = mmot::Rng::stream(seed, 9, static_cast<std::uint64_t>(t));
        std::vector<mmot::TestBasis> bases;
        mmot::Box box;
        for (int i = 0; i < 2; ++i) {
            const std::size_t cells = 2 + rng.below(3);
            bases.emplace_back(mmot::Cover1D::uniform(-1.0, 1.0, cells));
            box.lo.push_back(-1.0);
            box.hi.push_back(1.0);
        }
        const auto f = mmot::random_instance(2, 1 + rng.below(2), rng.below(2),
                                             seed * 1000 + static_cast<std::uint64_t>(t),
                                             box, -2.0, 2.0);
        mmot::DualVector y;
        for (const auto& b : bases) {
            y.y.emplace_back();
            for (std::size_t j = 0; j < b.size(); ++j)
                y.y.back().push_back(rng.uniform(-0.6, 0.6));
        }
        const auto bb = mmot::solve_bb(mmot::build_milp(f, bases, y));
        const auto grid = mmot::grid_oracle(f, bases, y, 1e-3);
        const double discrepancy = std::abs(bb.value - grid.value);
        const double margin = discrepancy - (grid.certificate + 1e-8);
        worst_discrepancy = std::max(worst_discrepancy, discrepancy);
        worst_margin = std::max(worst_margin, margin);
    }
    std::cout << "trials = " << trials << ", max |bb - grid| = " << worst_discrepancy
              << ", max excess over certificate = " << worst_margin << "\n";
    if (worst_margin > 0.0) {
        std::cout << "FAIL\n";
        return 1;
    }
    std::cout << "PASS\n";
    return 0;
}

int run_radius(const std::string& config_path) {
    const auto cfg = load_config(config_path);
    const auto covers = mmot::build_covers(cfg);
    const double l_f = mmot::lipschitz_l1(mmot::build_cost(cfg)).l_f;
    for (std::size_t i = 0; i < covers.size(); ++i)
        std::cout << "marginal " << i << ": cells = " << covers[i].cells()
                  << ", radius 2*mesh = " << mmot::radius_bound_w1(covers[i]) << "\n";
    std::cout << "l_f = " << l_f << "\n";
    std::cout << "eps_theo = " << mmot::theo_budget(l_f, covers, cfg.eps_lsip) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Certified bounds for multi-marginal optimal transport"};
    app.require_subcommand(1);

    std::string config_path, out_path;
    std::vector<std::size_t> knots;
    std::uint64_t seed = 1;
    int trials = 10;

    auto* solve = app.add_subcommand("solve", "solve one problem and write a report");
    solve->add_option("--config", config_path, "problem config JSON")->required();
    solve->add_option("--out", out_path, "report JSON path (default stdout)");

    auto* sweep = app.add_subcommand("sweep", "solve over increasing knot counts");
    sweep->add_option("--config", config_path, "problem config JSON")->required();
    sweep->add_option("--knots", knots, "knot counts, e.g. 5,10,20,50")
        ->required()
        ->delimiter(',');
    sweep->add_option("--out", out_path, "CSV path (default stdout)");

    auto* check = app.add_subcommand("oracle-check",
                                     "compare branch-and-bound with the grid scan");
    check->add_option("--seed", seed, "stream seed");
    check->add_option("--n", trials, "number of random instances");

    auto* radius = app.add_subcommand("radius", "print per-marginal radii and eps_theo");
    radius->add_option("--config", config_path, "problem config JSON")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) return run_solve(config_path, out_path);
        if (sweep->parsed()) return run_sweep(config_path, knots, out_path);
        if (check->parsed()) return run_oracle_check(seed, trials);
        if (radius->parsed()) return run_radius(config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
