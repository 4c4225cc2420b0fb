// equivar-nehari: config-driven experiment runner for the equivariant
// Nehari-manifold laboratory.  Every subcommand reads one flat key = value
// config file, prints a human-readable report to stdout, and emits a CSV
// table (to --csv PATH, or appended to stdout when no path is given).
//
// Exit codes: 0 verdict pass, 2 verdict fail, 1 runtime error.

#include <CLI11.hpp>

#include <equivar/census.hpp>

#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>

namespace {

struct Invocation {
    std::string config_path;
    std::string csv_path;  // empty: CSV follows the report on stdout
};

int emit(const std::string& report, const std::string& csv, const Invocation& inv,
         bool passed) {
    std::cout << report;
    if (inv.csv_path.empty()) {
        std::cout << "\n" << csv;
    } else {
        std::ofstream out(inv.csv_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write csv file: " + inv.csv_path);
        out << csv;
    }
    return passed ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Numerical laboratory for antipodally antisymmetric solutions of\n"
        "-eps^2 Lap_g u + u = |u|^{p-2} u on closed symmetric surfaces."};
    app.require_subcommand(1);

    Invocation inv;
    auto add = [&](const char* name, const char* blurb) {
        CLI::App* sub = app.add_subcommand(name, blurb);
        sub->add_option("--config", inv.config_path, "flat key = value experiment file")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--csv", inv.csv_path, "write the CSV table to this file");
        return sub;
    };

    CLI::App* ground = add("ground-state", "solve the planar limit profile, report its level");
    CLI::App* calculus = add("calculus-check",
                             "finite-difference audit of the metric-derivative formulas");
    CLI::App* convergence = add("convergence",
                                "minimal-level ratios against the doubled limit level over eps");
    CLI::App* identity = add("identity-check",
                             "barycenter-of-ansatz displacement over sampled centres");
    CLI::App* degeneracy = add("degeneracy",
                               "rotational near-kernel on the round sphere vs. a perturbation");
    CLI::App* census = add("census", "deflated solution survey against the topological bound");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const auto cfg = equivar::ExperimentConfig::from_file(inv.config_path);
        if (ground->parsed()) {
            const auto rep = equivar::run_ground_state(cfg);
            return emit(equivar::ground_state_text(rep), equivar::ground_state_csv(rep), inv,
                        rep.passed);
        }
        if (calculus->parsed()) {
            const auto rep = equivar::run_calculus_check(cfg);
            return emit(equivar::calculus_text(rep), equivar::calculus_csv(rep), inv,
                        rep.passed);
        }
        if (convergence->parsed()) {
            const auto rep = equivar::run_convergence_study(cfg);
            return emit(equivar::convergence_text(rep), equivar::convergence_csv(rep), inv,
                        rep.passed);
        }
        if (identity->parsed()) {
            const auto rep = equivar::run_identity_check(cfg);
            return emit(equivar::identity_text(rep), equivar::identity_csv(rep), inv,
                        rep.passed);
        }
        if (degeneracy->parsed()) {
            const auto rep = equivar::run_degeneracy_breaking(cfg);
            return emit(equivar::degeneracy_text(rep), equivar::degeneracy_csv(rep), inv,
                        rep.passed);
        }
        if (census->parsed()) {
            const auto rep = equivar::run_census(cfg);
            return emit(equivar::census_text(rep), equivar::census_csv(rep), inv,
                        rep.verdict != "bound_not_met");
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
