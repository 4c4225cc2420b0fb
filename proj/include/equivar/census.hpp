#pragma once

// Experiment drivers: flat key-value configuration, the quotient-topology
// multiplicity bound, and the reproducible studies exposed by the command-line
// tool (profile report, calculus audit, convergence study, concentration
// identity check, degeneracy breaking, solution census). Every driver returns
// a plain report struct; text/CSV renderers keep the output deterministic.

#include <equivar/forms.hpp>
#include <equivar/geodesic.hpp>
#include <equivar/ground_state.hpp>
#include <equivar/mesh.hpp>
#include <equivar/nehari.hpp>
#include <equivar/perturbation.hpp>
#include <equivar/solve.hpp>
#include <equivar/tensor_field.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace equivar {

// --- configuration ------------------------------------------------------------

// Flat "key = value" files; '#' starts a comment, blank lines are skipped,
// later duplicates win. Values stay strings until a typed getter parses them.
class ExperimentConfig {
  public:
    static ExperimentConfig from_string(const std::string& text) {
        ExperimentConfig cfg;
        std::istringstream in(text);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const size_t eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("config line " + std::to_string(line_no) +
                                            ": expected key = value");
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty())
                throw std::invalid_argument("config line " + std::to_string(line_no) +
                                            ": empty key");
            cfg.entries_.emplace_back(key, value);
        }
        return cfg;
    }

    static ExperimentConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open config file: " + path);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        return from_string(buffer.str());
    }

    bool has(const std::string& key) const { return find(key) != nullptr; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const std::string* v = find(key);
        return v ? *v : fallback;
    }

    double get_double(const std::string& key, double fallback) const {
        const std::string* v = find(key);
        return v ? parse_double(key, *v) : fallback;
    }

    int get_int(const std::string& key, int fallback) const {
        const std::string* v = find(key);
        if (!v) return fallback;
        const double d = parse_double(key, *v);
        const int i = static_cast<int>(d);
        if (static_cast<double>(i) != d)
            throw std::invalid_argument("config key '" + key + "': expected an integer");
        return i;
    }

    // Comma- or whitespace-separated list of numbers.
    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) const {
        const std::string* v = find(key);
        if (!v) return fallback;
        std::string item;
        std::vector<double> out;
        std::istringstream in(*v);
        while (std::getline(in, item, ',')) {
            std::istringstream fields(item);
            std::string token;
            while (fields >> token) out.push_back(parse_double(key, token));
        }
        if (out.empty()) throw std::invalid_argument("config key '" + key + "': empty list");
        return out;
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  private:
    static std::string trim(const std::string& s) {
        size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }

    static double parse_double(const std::string& key, const std::string& text) {
        size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(text, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("config key '" + key + "': cannot parse '" + text + "'");
        }
        if (used != text.size())
            throw std::invalid_argument("config key '" + key + "': trailing characters in '" +
                                        text + "'");
        return value;
    }

    const std::string* find(const std::string& key) const {
        for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
            if (it->first == key) return &it->second;
        return nullptr;
    }

    std::vector<std::pair<std::string, std::string>> entries_;
};

// --- quotient topology ---------------------------------------------------------

// Sum of Z2-Betti numbers of the antipodal quotient: the lower bound for the
// number of solution pairs. Sphere and ellipsoid quotient to the projective
// plane (1+1+1); the torus with the half-turn involution quotients to the
// Klein bottle (1+2+1).
inline int poincare_p1(const std::string& surface) {
    if (surface == "sphere" || surface == "ellipsoid") return 3;
    if (surface == "torus") return 4;
    throw std::invalid_argument("poincare_p1: unknown surface '" + surface + "'");
}

// --- configured geometry --------------------------------------------------------

struct ConfiguredGeometry {
    SymmetricMesh mesh;
    TensorField metric;
    std::string surface;
    std::string perturbation;  // none | ellipsoidal | shear
    double amplitude = 0.0;
};

namespace detail {

// Ellipsoidal recipe: amplitude a stretches the semi-axes to (1, 1+a, 1+2a),
// so the z axis is always the long axis and a = 0 is the round control.
inline TensorField perturbation_tensor(const SymmetricMesh& mesh, const std::string& family,
                                       double amplitude) {
    if (family == "ellipsoidal")
        return ellipsoidal_tensor(mesh,
                                  Eigen::Vector3d(1.0, 1.0 + amplitude, 1.0 + 2.0 * amplitude));
    if (family == "shear") {
        TensorField h = shear_bump_tensor(mesh, Eigen::Vector3d(1.0, 0.0, 0.0), 1.0, 0.8);
        const double sup = tensor_sup_norm(h);
        if (!(sup > 0)) throw std::runtime_error("shear perturbation vanished");
        const double rescale = amplitude / sup;
        for (auto& m : h.values) m *= rescale;
        return h;
    }
    throw std::invalid_argument("perturbation family '" + family + "' is not supported");
}

}  // namespace detail

inline ConfiguredGeometry build_geometry(const ExperimentConfig& cfg) {
    ConfiguredGeometry geom;
    geom.surface = cfg.get_string("surface", "sphere");
    const int refinement = cfg.get_int("refinement", 4);
    if (geom.surface == "sphere") {
        geom.mesh = build_sphere(refinement);
    } else if (geom.surface == "ellipsoid") {
        geom.mesh = build_ellipsoid(cfg.get_double("axis_a", 1.0), cfg.get_double("axis_b", 1.1),
                                    cfg.get_double("axis_c", 1.2), refinement);
    } else if (geom.surface == "torus") {
        geom.mesh = build_torus(cfg.get_double("torus_major", 2.0),
                                cfg.get_double("torus_minor", 1.0), refinement);
    } else {
        throw std::invalid_argument("unknown surface '" + geom.surface + "'");
    }

    geom.perturbation = cfg.get_string("perturbation", "none");
    geom.amplitude = cfg.get_double("amplitude", 0.05);
    if (geom.perturbation == "none" || geom.amplitude == 0.0) {
        geom.metric = conformal_tensor(geom.mesh, 1.0);
        return geom;
    }
    geom.metric = metric_from_perturbation(
        geom.mesh, detail::perturbation_tensor(geom.mesh, geom.perturbation, geom.amplitude), 1.0);
    return geom;
}

namespace detail {

inline std::string fmt(const char* pattern, double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, value);
    return buf;
}

}  // namespace detail

// --- radial profile report -----------------------------------------------------

struct GroundStateReport {
    int dim = 0;
    double exponent = 0.0;
    double u0 = 0.0;
    double level = 0.0;          // single-bump limit level
    double doubled_level = 0.0;  // antipodal-pair limit level
    double residual_sup = 0.0;
    double decay_rate = 0.0;
    double residual_bound = 0.0;
    bool passed = false;
};

inline GroundStateReport run_ground_state(const ExperimentConfig& cfg) {
    GroundStateReport report;
    report.dim = cfg.get_int("dim", 2);
    report.exponent = cfg.get_double("exponent", 4.0);
    report.residual_bound = cfg.get_double("residual_bound", 1e-6);
    const RadialProfile profile =
        solve_ground_state(report.dim, report.exponent, cfg.get_double("ode_tol", 1e-8));
    report.u0 = profile.u0;
    report.level = ground_level(profile);
    report.doubled_level = 2.0 * report.level;
    report.residual_sup = ode_residual_sup(profile);
    report.decay_rate = profile.decay_rate;
    report.passed = report.residual_sup <= report.residual_bound;
    return report;
}

inline std::string ground_state_text(const GroundStateReport& r) {
    std::ostringstream out;
    out << "radial profile: dim=" << r.dim << " exponent=" << detail::fmt("%.12g", r.exponent)
        << "\n";
    out << "  u0=" << detail::fmt("%.12g", r.u0) << " decay_rate="
        << detail::fmt("%.12g", r.decay_rate) << "\n";
    out << "  level=" << detail::fmt("%.12g", r.level)
        << " doubled_level=" << detail::fmt("%.12g", r.doubled_level) << "\n";
    out << "  ode_residual_sup=" << detail::fmt("%.12g", r.residual_sup)
        << " bound=" << detail::fmt("%.12g", r.residual_bound) << "\n";
    out << "verdict: " << (r.passed ? "pass" : "fail") << "\n";
    return out.str();
}

inline std::string ground_state_csv(const GroundStateReport& r) {
    std::ostringstream out;
    out << "dim,exponent,u0,level,doubled_level,residual_sup,decay_rate\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n", r.dim, r.exponent,
                  r.u0, r.level, r.doubled_level, r.residual_sup, r.decay_rate);
    out << buf;
    return out.str();
}

// --- calculus audit --------------------------------------------------------------

struct CalculusReport {
    int trials = 0;
    double worst_energy = 0.0;
    double worst_mass = 0.0;
    double worst_power = 0.0;
    double worst_compact = 0.0;
    double worst_identity = 0.0;       // compact-derivative defining identity
    double worst_nehari_slope = 0.0;   // scaled stationarity at the Nehari factor
    double fd_tol = 0.0;
    double identity_tol = 0.0;
    double nehari_tol = 0.0;
    bool passed = false;
};

inline CalculusReport run_calculus_check(const ExperimentConfig& cfg) {
    CalculusReport report;
    report.trials = cfg.get_int("trials", 20);
    report.fd_tol = cfg.get_double("fd_tol", 1e-5);
    report.identity_tol = cfg.get_double("identity_tol", 1e-10);
    report.nehari_tol = cfg.get_double("nehari_tol", 1e-8);
    const unsigned seed = static_cast<unsigned>(cfg.get_int("seed", 2024));
    const double eps = cfg.get_double("eps", 0.5);
    const double p = cfg.get_double("exponent", 4.0);

    const ConfiguredGeometry geom = build_geometry(cfg);
    const auto& mesh = geom.mesh;

    const FdReport fd = fd_validate(mesh, geom.metric, eps, p, report.fd_tol, report.trials, seed);
    report.worst_energy = fd.worst_energy;
    report.worst_mass = fd.worst_mass;
    report.worst_power = fd.worst_power;
    report.worst_compact = fd.worst_compact;

    const auto forms = assemble_forms(mesh, geom.metric, eps, p);
    std::mt19937_64 rng(seed + 0x9e3779b9ULL);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    auto random_vector = [&] {
        return Eigen::VectorXd::NullaryExpr(forms.size(), [&](Eigen::Index) { return unit(rng); })
            .eval();
    };
    for (int k = 0; k < report.trials; ++k) {
        const Eigen::VectorXd u = random_vector();
        const Eigen::VectorXd v = random_vector();
        Direction dir;
        dir.d_eps = 0.2 * unit(rng) * eps;
        dir.d_h = zero_tensor(mesh);
        for (auto& m : dir.d_h.values) {
            const double a = 0.4 * unit(rng), b = 0.4 * unit(rng), c = 0.4 * unit(rng);
            m << a, b, b, c;
        }
        symmetrize_tensor(mesh, dir.d_h);

        const Eigen::VectorXd au = forms.apply_compact(u);
        const Eigen::VectorXd dau = dA(forms, geom.metric, dir, u);
        const double lhs = dE(forms, geom.metric, dir, au, v) + forms.energy_product(dau, v);
        const double rhs = dG(forms, geom.metric, dir, u, v);
        report.worst_identity = std::max(
            report.worst_identity, std::abs(lhs - rhs) / (std::abs(lhs) + std::abs(rhs) + 1.0));

        const double t = nehari_scale(forms, u);
        const double slope = t * forms.energy_product(u, u) -
                             std::pow(t, p - 1.0) * forms.lp_integral(u);
        report.worst_nehari_slope =
            std::max(report.worst_nehari_slope,
                     std::abs(slope) / std::max(1.0, t * forms.energy_product(u, u)));
    }
    report.passed = fd.pass && report.worst_identity <= report.identity_tol &&
                    report.worst_nehari_slope <= report.nehari_tol;
    return report;
}

inline std::string calculus_text(const CalculusReport& r) {
    std::ostringstream out;
    out << "calculus audit: trials=" << r.trials << "\n";
    out << "  fd_relative_errors: energy=" << detail::fmt("%.3e", r.worst_energy)
        << " mass=" << detail::fmt("%.3e", r.worst_mass)
        << " power=" << detail::fmt("%.3e", r.worst_power)
        << " compact=" << detail::fmt("%.3e", r.worst_compact)
        << " (tol " << detail::fmt("%.3e", r.fd_tol) << ")\n";
    out << "  compact_identity=" << detail::fmt("%.3e", r.worst_identity) << " (tol "
        << detail::fmt("%.3e", r.identity_tol) << ")\n";
    out << "  nehari_slope=" << detail::fmt("%.3e", r.worst_nehari_slope) << " (tol "
        << detail::fmt("%.3e", r.nehari_tol) << ")\n";
    out << "verdict: " << (r.passed ? "pass" : "fail") << "\n";
    return out.str();
}

inline std::string calculus_csv(const CalculusReport& r) {
    std::ostringstream out;
    out << "trials,worst_energy,worst_mass,worst_power,worst_compact,worst_identity,"
           "worst_nehari_slope\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n", r.trials,
                  r.worst_energy, r.worst_mass, r.worst_power, r.worst_compact, r.worst_identity,
                  r.worst_nehari_slope);
    out << buf;
    return out.str();
}

// --- convergence study ------------------------------------------------------------

struct ConvergenceRow {
    double eps = 0.0;
    double estimate = 0.0;
    double ratio = 0.0;  // estimate / doubled limit level
    double perturbed_estimate = 0.0;
    double perturbed_ratio = 0.0;
    double deviation = 0.0;  // |perturbed_ratio - ratio| / ratio
};

struct ConvergenceReport {
    std::string estimator;
    std::string perturbation;
    double amplitude = 0.0;
    double reference_level = 0.0;  // doubled limit level
    std::vector<ConvergenceRow> rows;
    bool passed = false;
    std::string verdict;  // pass | fail | insufficient_data
};

inline ConvergenceReport run_convergence_study(const ExperimentConfig& cfg) {
    ConvergenceReport report;
    report.estimator = cfg.get_string("estimator", "ansatz");
    if (report.estimator != "ansatz" && report.estimator != "descent")
        throw std::invalid_argument("estimator must be 'ansatz' or 'descent'");
    report.perturbation = cfg.get_string("perturbation", "ellipsoidal");
    report.amplitude = cfg.get_double("amplitude", 0.05);

    const std::vector<double> eps_list = cfg.get_double_list("eps_list", {0.4, 0.2, 0.1});
    for (size_t i = 0; i + 1 < eps_list.size(); ++i)
        if (!(eps_list[i] > eps_list[i + 1]))
            throw std::invalid_argument("eps_list must be strictly decreasing");
    if (!(eps_list.back() > 0)) throw std::invalid_argument("eps_list entries must be positive");

    const double p = cfg.get_double("exponent", 4.0);
    const RadialProfile profile = solve_ground_state(2, p, cfg.get_double("ode_tol", 1e-8));
    report.reference_level = 2.0 * ground_level(profile);

    // Base surface without the perturbation; the companion adds it on top.
    const ConfiguredGeometry base = [&] {
        ExperimentConfig plain = ExperimentConfig::from_string(
            "surface = " + cfg.get_string("surface", "sphere") +
            "\nrefinement = " + std::to_string(cfg.get_int("refinement", 4)) +
            "\naxis_a = " + std::to_string(cfg.get_double("axis_a", 1.0)) +
            "\naxis_b = " + std::to_string(cfg.get_double("axis_b", 1.1)) +
            "\naxis_c = " + std::to_string(cfg.get_double("axis_c", 1.2)) +
            "\ntorus_major = " + std::to_string(cfg.get_double("torus_major", 2.0)) +
            "\ntorus_minor = " + std::to_string(cfg.get_double("torus_minor", 1.0)) +
            "\nperturbation = none\n");
        return build_geometry(plain);
    }();
    const auto& mesh = base.mesh;
    TensorField pert_metric = base.metric;
    if (report.perturbation != "none" && report.amplitude != 0.0)
        pert_metric = metric_from_perturbation(
            mesh, detail::perturbation_tensor(mesh, report.perturbation, report.amplitude), 1.0);

    // First farthest-point site: on the subdivided icosahedron this is an
    // original coarse vertex, whose stencil integrates the peak best at the
    // coarse end of the eps range.
    const int anchor = spread_vertices(mesh, base.metric, 1).front();
    const int descent_starts = cfg.get_int("descent_starts", 3);
    const double descent_tol = cfg.get_double("descent_tol", 1e-6);
    const int descent_max = cfg.get_int("descent_max_iterations", 2000);

    auto estimate = [&](const TensorField& metric, double eps) {
        const auto forms = assemble_forms(mesh, metric, eps, p);
        if (report.estimator == "ansatz")
            return forms.functional(phi_ansatz(forms, metric, anchor, profile));
        return run_min_level(forms, metric, profile, descent_starts, descent_tol, descent_max)
            .level;
    };

    for (double eps : eps_list) {
        ConvergenceRow row;
        row.eps = eps;
        row.estimate = estimate(base.metric, eps);
        row.ratio = row.estimate / report.reference_level;
        row.perturbed_estimate = estimate(pert_metric, eps);
        row.perturbed_ratio = row.perturbed_estimate / report.reference_level;
        row.deviation = std::abs(row.perturbed_ratio - row.ratio) / std::abs(row.ratio);
        report.rows.push_back(row);
    }

    if (report.rows.size() < 3) {
        report.verdict = "insufficient_data";
        report.passed = false;
        return report;
    }
    bool monotone = true;
    for (size_t i = 0; i + 1 < report.rows.size(); ++i)
        monotone = monotone && report.rows[i + 1].ratio <= report.rows[i].ratio;
    const double final_ratio = report.rows.back().ratio;
    bool stable = true;
    for (const auto& row : report.rows) stable = stable && row.deviation < 0.10;
    report.passed = monotone && final_ratio >= 0.85 && final_ratio <= 1.15 && stable;
    report.verdict = report.passed ? "pass" : "fail";
    return report;
}

inline std::string convergence_text(const ConvergenceReport& r) {
    std::ostringstream out;
    out << "convergence study: estimator=" << r.estimator << " perturbation=" << r.perturbation
        << " amplitude=" << detail::fmt("%.12g", r.amplitude) << "\n";
    out << "  reference doubled level=" << detail::fmt("%.12g", r.reference_level) << "\n";
    for (const auto& row : r.rows) {
        char line[256];
        std::snprintf(line, sizeof line,
                      "  eps=%-8.4g estimate=%-14.10g ratio=%-10.6g perturbed_ratio=%-10.6g "
                      "deviation=%.3g\n",
                      row.eps, row.estimate, row.ratio, row.perturbed_ratio, row.deviation);
        out << line;
    }
    out << "verdict: " << r.verdict << "\n";
    return out.str();
}

inline std::string convergence_csv(const ConvergenceReport& r) {
    std::ostringstream out;
    out << "eps,estimate,ratio,perturbed_estimate,perturbed_ratio,deviation\n";
    for (const auto& row : r.rows) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n", row.eps,
                      row.estimate, row.ratio, row.perturbed_estimate, row.perturbed_ratio,
                      row.deviation);
        out << buf;
    }
    return out.str();
}

// --- concentration identity check ---------------------------------------------------

struct IdentitySample {
    int vertex = 0;
    double displacement = 0.0;     // |barycenter(ansatz) - centre|
    double antipodal_error = 0.0;  // |barycenter(mirror ansatz) + barycenter(ansatz)|
};

struct IdentityReport {
    double eps = 0.0;
    double bound = 0.0;
    std::vector<IdentitySample> samples;
    double max_displacement = 0.0;
    double mean_displacement = 0.0;
    double trend_eps = 0.0;     // coarser-scale comparison row
    double trend_max = 0.0;     // max displacement at trend_eps
    bool passed = false;
    std::string verdict;
};

inline IdentityReport run_identity_check(const ExperimentConfig& cfg) {
    IdentityReport report;
    report.eps = cfg.get_double("eps", 0.1);
    report.bound = cfg.get_double("bound", 0.2);
    report.trend_eps = cfg.get_double("trend_eps", 0.4);
    const int n_samples = cfg.get_int("n_samples", 12);
    const double p = cfg.get_double("exponent", 4.0);
    const double antipodal_tol = cfg.get_double("antipodal_tol", 1e-10);

    const ConfiguredGeometry geom = build_geometry(cfg);
    const auto& mesh = geom.mesh;
    const RadialProfile profile = solve_ground_state(2, p, cfg.get_double("ode_tol", 1e-8));
    const std::vector<int> sites = spread_vertices(mesh, geom.metric, n_samples);

    const auto forms = assemble_forms(mesh, geom.metric, report.eps, p);
    const auto forms_trend = assemble_forms(mesh, geom.metric, report.trend_eps, p);

    bool antipodal_ok = true;
    double total = 0.0;
    for (int q : sites) {
        IdentitySample sample;
        sample.vertex = q;
        const Eigen::VectorXd phi = phi_ansatz(forms, geom.metric, q, profile);
        const Eigen::Vector3d b = barycenter(forms, phi);
        sample.displacement = (b - mesh.vertices[q]).norm();
        const Eigen::VectorXd phi_m = phi_ansatz(forms, geom.metric, mesh.vertex_pair[q], profile);
        sample.antipodal_error = (barycenter(forms, phi_m) + b).norm();
        antipodal_ok =
            antipodal_ok && sample.antipodal_error <= antipodal_tol * std::max(1.0, b.norm());
        report.max_displacement = std::max(report.max_displacement, sample.displacement);
        total += sample.displacement;
        report.samples.push_back(sample);

        const Eigen::VectorXd phi_t = phi_ansatz(forms_trend, geom.metric, q, profile);
        report.trend_max = std::max(
            report.trend_max, (barycenter(forms_trend, phi_t) - mesh.vertices[q]).norm());
    }
    report.mean_displacement = total / static_cast<double>(report.samples.size());
    report.passed = report.max_displacement <= report.bound && antipodal_ok;
    report.verdict = report.passed ? "pass" : "fail";
    return report;
}

inline std::string identity_text(const IdentityReport& r) {
    std::ostringstream out;
    out << "concentration identity check: eps=" << detail::fmt("%.12g", r.eps)
        << " samples=" << r.samples.size() << " bound=" << detail::fmt("%.12g", r.bound) << "\n";
    for (const auto& s : r.samples) {
        char line[160];
        std::snprintf(line, sizeof line, "  vertex=%-7d displacement=%-12.6g antipodal=%.3e\n",
                      s.vertex, s.displacement, s.antipodal_error);
        out << line;
    }
    out << "  max=" << detail::fmt("%.6g", r.max_displacement)
        << " mean=" << detail::fmt("%.6g", r.mean_displacement) << "\n";
    out << "  trend: eps=" << detail::fmt("%.12g", r.trend_eps)
        << " max=" << detail::fmt("%.6g", r.trend_max) << "\n";
    out << "verdict: " << r.verdict << "\n";
    return out.str();
}

inline std::string identity_csv(const IdentityReport& r) {
    std::ostringstream out;
    out << "vertex,displacement,antipodal_error\n";
    for (const auto& s : r.samples) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g\n", s.vertex, s.displacement,
                      s.antipodal_error);
        out << buf;
    }
    return out.str();
}

// --- degeneracy breaking --------------------------------------------------------------

struct DegeneracyReport {
    double eps = 0.0;
    double amplitude = 0.0;
    double margin_factor = 0.0;  // required growth of the non-degeneracy margin
    SolutionRecord round_record;
    SolutionRecord perturbed_record;
    double margin_ratio = 0.0;
    bool passed = false;
    std::string verdict;  // pass | fail | control
};

inline DegeneracyReport run_degeneracy_breaking(const ExperimentConfig& cfg) {
    DegeneracyReport report;
    report.eps = cfg.get_double("eps", 0.5);
    report.amplitude = cfg.get_double("amplitude", 0.05);
    report.margin_factor = cfg.get_double("margin_factor", 10.0);
    const int refinement = cfg.get_int("refinement", 6);
    const double p = cfg.get_double("exponent", 4.0);
    const int n_eigs = cfg.get_int("n_eigs", 8);
    const double kernel_tol = cfg.get_double("kernel_tol", 1e-3);
    const double newton_tol = cfg.get_double("newton_tol", 1e-10);
    const int newton_max = cfg.get_int("newton_max_iterations", 30);

    const auto mesh = build_sphere(refinement);
    const RadialProfile profile = solve_ground_state(2, p, cfg.get_double("ode_tol", 1e-8));
    // Anchor at the long axis of the ellipsoidal family, where the perturbed
    // solution is position-stable; on the round stage the position is free.
    const int anchor = nearest_vertex(mesh, Eigen::Vector3d(0, 0, 1));

    const TensorField round_metric = conformal_tensor(mesh, 1.0);
    const auto forms = assemble_forms(mesh, round_metric, report.eps, p);
    report.round_record = newton_solve(forms, phi_ansatz(forms, round_metric, anchor, profile),
                                       newton_tol, newton_max, "round");
    report.round_record.spectrum =
        linearized_spectrum(forms, report.round_record.u, n_eigs, kernel_tol);

    TensorField pert_metric = round_metric;
    if (report.amplitude != 0.0)
        pert_metric = metric_from_perturbation(
            mesh, detail::perturbation_tensor(mesh, "ellipsoidal", report.amplitude), 1.0);
    const auto forms_p = assemble_forms(mesh, pert_metric, report.eps, p);
    report.perturbed_record =
        newton_solve(forms_p, report.round_record.u, newton_tol, newton_max, "perturbed");
    report.perturbed_record.spectrum =
        linearized_spectrum(forms_p, report.perturbed_record.u, n_eigs, kernel_tol);

    const double round_margin = report.round_record.spectrum.margin;
    const double pert_margin = report.perturbed_record.spectrum.margin;
    report.margin_ratio = round_margin > 0 ? pert_margin / round_margin
                                           : std::numeric_limits<double>::infinity();

    const bool both_solved = report.round_record.converged && report.perturbed_record.converged &&
                             report.round_record.spectrum.converged &&
                             report.perturbed_record.spectrum.converged;
    if (report.amplitude == 0.0) {
        report.passed = both_solved &&
                        report.perturbed_record.spectrum.kernel_dim_estimate ==
                            report.round_record.spectrum.kernel_dim_estimate &&
                        pert_margin == round_margin;
        report.verdict = "control";
        return report;
    }
    report.passed = both_solved && report.round_record.spectrum.kernel_dim_estimate >= 2 &&
                    report.perturbed_record.spectrum.kernel_dim_estimate == 0 &&
                    pert_margin >= report.margin_factor * round_margin;
    report.verdict = report.passed ? "pass" : "fail";
    return report;
}

inline std::string degeneracy_text(const DegeneracyReport& r) {
    std::ostringstream out;
    out << "degeneracy breaking: eps=" << detail::fmt("%.12g", r.eps)
        << " amplitude=" << detail::fmt("%.12g", r.amplitude)
        << " margin_factor=" << detail::fmt("%.12g", r.margin_factor) << "\n";
    out << solution_text_block(r.round_record);
    out << solution_text_block(r.perturbed_record);
    out << "  margin_ratio=" << detail::fmt("%.6g", r.margin_ratio) << "\n";
    out << "verdict: " << r.verdict << "\n";
    return out.str();
}

inline std::string degeneracy_csv(const DegeneracyReport& r) {
    std::ostringstream out;
    out << solutions_csv_header();
    out << solution_csv_row(r.round_record);
    out << solution_csv_row(r.perturbed_record);
    return out.str();
}

// --- solution census --------------------------------------------------------------------

struct CensusReport {
    std::string surface;
    double eps = 0.0;
    double level_cap = 0.0;
    double orbit_tol = 0.0;
    int p1_bound = 0;
    std::vector<SolutionRecord> accepted;
    std::vector<SolutionRecord> rejected;  // converged but outside the filter
    int starts_attempted = 0;
    int starts_converged = 0;
    int rejected_level = 0;
    int rejected_nodal = 0;
    int rejected_resolution = 0;  // peak collapsed below min_core vertices
    int min_core = 0;
    double h_over_eps = 0.0;  // mesh scale relative to the concentration scale
    bool round_orbit = false;      // the round sphere carries a solution orbit
    bool orbit_degenerate = false; // distinct clusters at matching levels
    bool bound_met = false;
    std::string verdict;  // bound_met | bound_not_met | orbit_degenerate
};

inline CensusReport run_census(const ExperimentConfig& cfg) {
    CensusReport report;
    const ConfiguredGeometry geom = build_geometry(cfg);
    report.surface = geom.surface;
    report.eps = cfg.get_double("eps", 0.2);
    report.orbit_tol = cfg.get_double("orbit_tol", 0.05);
    report.p1_bound = poincare_p1(geom.surface);
    report.round_orbit = geom.surface == "sphere" &&
                         (geom.perturbation == "none" || geom.amplitude == 0.0);

    const double p = cfg.get_double("exponent", 4.0);
    const RadialProfile profile = solve_ground_state(2, p, cfg.get_double("ode_tol", 1e-8));
    report.level_cap = cfg.get_double("level_cap", 3.0 * ground_level(profile));

    const int n_starts = cfg.get_int("n_starts", 6);
    const double newton_tol = cfg.get_double("newton_tol", 1e-10);
    const int newton_max = cfg.get_int("newton_max_iterations", 30);
    const int n_eigs = cfg.get_int("n_eigs", 8);
    const double kernel_tol = cfg.get_double("kernel_tol", 1e-3);
    report.min_core = cfg.get_int("min_core_vertices", 4);

    const auto& mesh = geom.mesh;
    report.h_over_eps = max_edge_length(mesh) / report.eps;
    const auto forms = assemble_forms(mesh, geom.metric, report.eps, p);
    std::vector<Eigen::VectorXd> starts;
    if (n_starts > 0)
        for (int q : spread_vertices(mesh, geom.metric, n_starts))
            starts.push_back(phi_ansatz(forms, geom.metric, q, profile));

    // An empty start list is a legal (if useless) survey: zero pairs, bound not met.
    SearchOutcome outcome;
    if (!starts.empty())
        outcome = deflated_search(forms, starts, newton_tol, newton_max, geom.surface);
    report.starts_attempted = outcome.starts_attempted;
    report.starts_converged = outcome.starts_converged;

    for (auto& rec : outcome.pairs) {
        rec.spectrum = linearized_spectrum(forms, rec.u, n_eigs, kernel_tol);
        const bool level_ok = rec.j_value < report.level_cap;
        const bool nodal_ok = rec.nodal_domains == 2;
        const bool core_ok = rec.peak_core >= report.min_core;
        if (!level_ok) ++report.rejected_level;
        if (!nodal_ok) ++report.rejected_nodal;
        if (!core_ok) ++report.rejected_resolution;
        (level_ok && nodal_ok && core_ok ? report.accepted : report.rejected)
            .push_back(std::move(rec));
    }

    const auto record_order = [](const SolutionRecord& a, const SolutionRecord& b) {
        if (a.j_value != b.j_value) return a.j_value < b.j_value;
        for (int k = 0; k < 3; ++k)
            if (a.barycenter[k] != b.barycenter[k]) return a.barycenter[k] < b.barycenter[k];
        return false;
    };
    std::sort(report.accepted.begin(), report.accepted.end(), record_order);
    std::sort(report.rejected.begin(), report.rejected.end(), record_order);

    for (size_t i = 0; i < report.accepted.size(); ++i)
        for (size_t j = i + 1; j < report.accepted.size(); ++j) {
            const double ji = report.accepted[i].j_value, jj = report.accepted[j].j_value;
            if (std::abs(ji - jj) <= report.orbit_tol * std::max(std::abs(ji), std::abs(jj)))
                report.orbit_degenerate = true;
        }

    report.bound_met = static_cast<int>(report.accepted.size()) >= report.p1_bound;
    if (report.round_orbit && report.orbit_degenerate)
        report.verdict = "orbit_degenerate";
    else
        report.verdict = report.bound_met ? "bound_met" : "bound_not_met";
    return report;
}

inline std::string census_text(const CensusReport& r) {
    std::ostringstream out;
    out << "solution census: surface=" << r.surface << " eps=" << detail::fmt("%.12g", r.eps)
        << "\n";
    out << "  starts: attempted=" << r.starts_attempted << " converged=" << r.starts_converged
        << "\n";
    out << "  level_cap=" << detail::fmt("%.12g", r.level_cap)
        << " rejected_level=" << r.rejected_level << " rejected_nodal=" << r.rejected_nodal
        << " rejected_resolution=" << r.rejected_resolution << "\n";
    out << "  resolution: h/eps=" << detail::fmt("%.3g", r.h_over_eps)
        << " min_core=" << r.min_core;
    if (r.h_over_eps > 0.5) out << "  [advisory: exceeds the trusted 0.5 guideline]";
    out << "\n";
    out << "  multiplicity bound (quotient Betti sum)=" << r.p1_bound
        << " accepted_pairs=" << r.accepted.size() << "\n";
    for (const auto& rec : r.accepted) out << solution_text_block(rec);
    if (!r.rejected.empty()) {
        out << "  outside filter:\n";
        for (const auto& rec : r.rejected) out << solution_text_block(rec);
    }
    if (r.round_orbit)
        out << "  round sphere: solutions form a rotation orbit; matching levels flag="
            << (r.orbit_degenerate ? 1 : 0) << "\n";
    out << "verdict: " << r.verdict << "\n";
    return out.str();
}

inline std::string census_csv(const CensusReport& r) {
    std::ostringstream out;
    out << "accepted," << solutions_csv_header();
    for (const auto& rec : r.accepted) out << "1," << solution_csv_row(rec);
    for (const auto& rec : r.rejected) out << "0," << solution_csv_row(rec);
    return out.str();
}

}  // namespace equivar
