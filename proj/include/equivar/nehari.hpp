#pragma once

// Nehari projection, cutoff transplantation of the radial profile, the
// equivariant two-bump ansatz, and a gradient-flow estimate of the minimal
// level on the equivariant Nehari set.
//
// Exactness convention: the ansatz is always built around the canonical
// representative of the centre pair (the smaller vertex index); the mirrored
// bump is produced by explicitly permuting that single field, never by a
// second distance computation. Together with one shared Nehari factor this
// makes the ansatz antisymmetric bitwise, not just to roundoff.

#include <Eigen/Dense>

#include <equivar/forms.hpp>
#include <equivar/geodesic.hpp>
#include <equivar/ground_state.hpp>
#include <equivar/mesh.hpp>
#include <equivar/tensor_field.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace equivar {

struct AnsatzParams {
    double eps = 0.1;
    double cutoff_radius = 0.0;  // R; nonpositive requests the default
    int center = 0;              // q
    const RadialProfile* profile = nullptr;
};

struct NehariPoint {
    Eigen::VectorXd u;
    double t_scale = 0.0;
    double j_value = 0.0;
};

inline double nehari_scale(const DiscreteForms& forms, const Eigen::VectorXd& u) {
    const double e = forms.energy_product(u, u);
    const double n = forms.lp_integral(u);
    if (!(e > 0) || !(n > 0)) throw std::invalid_argument("nehari_scale: zero field");
    return std::pow(e / n, 1.0 / (forms.exponent - 2.0));
}

inline NehariPoint nehari_normalize(const DiscreteForms& forms, const Eigen::VectorXd& u) {
    NehariPoint pt;
    pt.t_scale = nehari_scale(forms, u);
    pt.u = pt.t_scale * u;
    pt.j_value = forms.functional(pt.u);
    return pt;
}

// C^2 cutoff: 1 on [0, R/2], 0 from R on, quintic smoothstep in between.
// Max slope is 15/(4R); any cutoff over a width-R/2 transition has mean slope
// 2/R, so O(1/R) is the best possible scaling and the constant is harmless.
inline double cutoff_chi(double d, double radius) {
    if (d <= 0.5 * radius) return 1.0;
    if (d >= radius) return 0.0;
    const double s = (d - 0.5 * radius) / (0.5 * radius);
    return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

inline double default_cutoff_radius(const SymmetricMesh& mesh, double pair_distance) {
    return std::min(0.45 * pair_distance, 0.45 * injectivity_estimate(mesh));
}

namespace detail {

inline Eigen::VectorXd bubble_from_distances(const std::vector<double>& dist,
                                             const RadialProfile& profile, double eps,
                                             double radius) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<int>(dist.size()));
    for (size_t v = 0; v < dist.size(); ++v)
        if (dist[v] < radius)
            w[static_cast<int>(v)] =
                bubble_value(profile, eps, dist[v]) * cutoff_chi(dist[v], radius);
    return w;
}

}  // namespace detail

// W_{q,eps}: the scaled radial profile of the geodesic distance to q, cut off
// inside a ball whose mirror ball it never meets.
inline Eigen::VectorXd transplant_bubble(const SymmetricMesh& mesh, const TensorField& metric,
                                         const AnsatzParams& params) {
    if (params.profile == nullptr)
        throw std::invalid_argument("transplant_bubble: missing radial profile");
    if (!(params.eps > 0)) throw std::invalid_argument("transplant_bubble: eps must be positive");
    if (params.center < 0 || params.center >= mesh.num_vertices())
        throw std::invalid_argument("transplant_bubble: center out of range");
    const auto dist = distance_field(mesh, metric, params.center);
    const double pair_distance = dist[mesh.vertex_pair[params.center]];
    const double radius = params.cutoff_radius > 0
                              ? params.cutoff_radius
                              : default_cutoff_radius(mesh, pair_distance);
    if (!(radius < 0.5 * pair_distance))
        throw std::runtime_error("transplant_bubble: cutoff ball meets its mirror ball");
    if (!(radius <= injectivity_estimate(mesh)))
        throw std::runtime_error("transplant_bubble: cutoff beyond the injectivity estimate");
    return detail::bubble_from_distances(dist, *params.profile, params.eps, radius);
}

// The equivariant ansatz: positive bump at the canonical centre, its exact
// mirror negated, one shared Nehari factor. Satisfies S phi = phi bitwise and
// phi(sigma q) = -phi(q) bitwise.
inline Eigen::VectorXd phi_ansatz(const DiscreteForms& forms, const TensorField& metric, int q,
                                  const RadialProfile& profile, double cutoff_radius = 0.0) {
    const SymmetricMesh& mesh = *forms.mesh;
    const int qc = std::min(q, mesh.vertex_pair[q]);
    AnsatzParams params;
    params.eps = forms.eps;
    params.cutoff_radius = cutoff_radius;
    params.center = qc;
    params.profile = &profile;
    const Eigen::VectorXd w = transplant_bubble(mesh, metric, params);
    Eigen::VectorXd raw(w.size());
    for (int v = 0; v < w.size(); ++v) raw[v] = w[v] - w[mesh.vertex_pair[v]];
    const double t = nehari_scale(forms, raw);
    Eigen::VectorXd phi = t * raw;
    if (q != qc) phi = -phi;
    return phi;
}

// Farthest-point sampling of k well-spread canonical vertices, treating each
// mirror pair as one site (sources march together with their mirrors).
inline std::vector<int> spread_vertices(const SymmetricMesh& mesh, const TensorField& metric,
                                        int k) {
    if (k < 1) throw std::invalid_argument("spread_vertices: need k >= 1");
    std::vector<int> picked;
    std::vector<int> sources;
    picked.push_back(std::min(0, mesh.vertex_pair[0]));
    while (static_cast<int>(picked.size()) < k) {
        sources.clear();
        for (int v : picked) {
            sources.push_back(v);
            sources.push_back(mesh.vertex_pair[v]);
        }
        const auto dist = fast_marching_distances(mesh, metric, sources);
        int best = -1;
        double best_d = -1.0;
        for (int v = 0; v < mesh.num_vertices(); ++v) {
            const int c = std::min(v, mesh.vertex_pair[v]);
            if (c != v) continue;  // one representative per pair
            if (dist[v] > best_d) {
                best_d = dist[v];
                best = v;
            }
        }
        if (best < 0 || best_d <= 0.0) break;  // mesh exhausted
        picked.push_back(best);
    }
    return picked;
}

struct DescentRecord {
    int start_vertex = -1;
    double level = 0.0;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct MinLevelReport {
    double level = 0.0;
    std::vector<DescentRecord> starts;
};

// Armijo gradient flow on the equivariant Nehari set: step along -grad J in
// the energy product, rescale back to the Nehari set, accept on sufficient
// decrease. An estimate (upper bound) of the minimal level, refined later by
// the Newton solver.
inline DescentRecord nehari_descent(const DiscreteForms& forms, const Eigen::VectorXd& start,
                                    double tol = 1e-6, int max_iterations = 2000) {
    DescentRecord rec;
    NehariPoint pt = nehari_normalize(forms, project_equivariant(*forms.mesh, start));
    Eigen::VectorXd u = pt.u;
    double j = pt.j_value;
    for (rec.iterations = 0; rec.iterations < max_iterations; ++rec.iterations) {
        const Eigen::VectorXd grad = project_equivariant(*forms.mesh, forms.gradient(u));
        const double gnorm2 = forms.energy_product(grad, grad);
        rec.residual = std::sqrt(std::max(0.0, gnorm2));
        const double unorm = std::sqrt(forms.energy_product(u, u));
        if (rec.residual <= tol * std::max(1.0, unorm)) {
            rec.converged = true;
            break;
        }
        double step = 1.0;
        bool accepted = false;
        while (step > 1e-12) {
            Eigen::VectorXd cand = u - step * grad;
            const double cn = forms.lp_integral(cand);
            if (cn > 0) {
                cand = nehari_scale(forms, cand) * cand;
                const double jc = forms.functional(cand);
                if (jc <= j - 1e-4 * step * gnorm2) {
                    u = std::move(cand);
                    j = jc;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) break;  // flat to machine precision
    }
    rec.level = j;
    return rec;
}

inline MinLevelReport run_min_level(const DiscreteForms& forms, const TensorField& metric,
                                    const RadialProfile& profile, int n_samples,
                                    double tol = 1e-6, int max_iterations = 2000) {
    if (n_samples < 1) throw std::invalid_argument("run_min_level: need n_samples >= 1");
    MinLevelReport report;
    report.level = std::numeric_limits<double>::infinity();
    for (int q : spread_vertices(*forms.mesh, metric, n_samples)) {
        DescentRecord rec =
            nehari_descent(forms, phi_ansatz(forms, metric, q, profile), tol, max_iterations);
        rec.start_vertex = q;
        report.level = std::min(report.level, rec.level);
        report.starts.push_back(rec);
    }
    return report;
}

// m-tau estimate: the lowest level reached over all descents.
inline double estimate_m_tau(const DiscreteForms& forms, const TensorField& metric,
                             const RadialProfile& profile, int n_samples) {
    return run_min_level(forms, metric, profile, n_samples).level;
}

}  // namespace equivar
