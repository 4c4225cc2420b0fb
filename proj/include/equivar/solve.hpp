#pragma once

// Newton solver in the equivariant subspace, spectral non-degeneracy audit of
// the linearized operator, nodal-domain count, barycenter map, and a deflated
// multi-start search that clusters solutions into (u, -u) pairs.

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseCholesky>

#include <equivar/forms.hpp>
#include <equivar/mesh.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace equivar {

struct SpectrumReport {
    std::vector<double> eigenvalues;  // sorted by |lambda|, nearest zero first
    int kernel_dim_estimate = 0;      // #{ |lambda| < resolved kernel tol }
    int morse_index = 0;              // #{ lambda < -resolved kernel tol }
    double margin = 0.0;              // min |lambda|
    double kernel_tol_used = 0.0;     // resolved absolute tolerance
    bool converged = true;
};

struct SolutionRecord {
    Eigen::VectorXd u;
    double eps = 0.0;
    std::string metric_tag;
    double j_value = 0.0;
    double residual_norm = 0.0;  // energy norm of the gradient at u
    int nodal_domains = 0;
    int peak_core = 0;  // positive-part vertices above half peak height
    Eigen::Vector3d barycenter = Eigen::Vector3d::Zero();
    SpectrumReport spectrum;
    bool converged = false;
    int iterations = 0;
    double tikhonov_used = 0.0;  // largest regularization shift applied
};

// --- nodal domains ----------------------------------------------------------

// Connected components of {u > 0} and {u < 0} on the vertex graph; vertices
// within 1e-12 of zero (relative to sup |u|) belong to the interface.
inline int nodal_domains(const SymmetricMesh& mesh, const Eigen::VectorXd& u) {
    const int n = mesh.num_vertices();
    if (u.size() != n) throw std::invalid_argument("nodal_domains: field size mismatch");
    const double floor = 1e-12 * u.lpNorm<Eigen::Infinity>();
    std::vector<signed char> sign(n, 0);
    for (int v = 0; v < n; ++v)
        if (u[v] > floor)
            sign[v] = 1;
        else if (u[v] < -floor)
            sign[v] = -1;

    std::vector<std::vector<int>> adj(n);
    for (const auto& tri : mesh.triangles)
        for (int k = 0; k < 3; ++k) {
            adj[tri[k]].push_back(tri[(k + 1) % 3]);
            adj[tri[k]].push_back(tri[(k + 2) % 3]);
        }

    std::vector<char> seen(n, 0);
    int components = 0;
    std::queue<int> frontier;
    for (int v = 0; v < n; ++v) {
        if (seen[v] || sign[v] == 0) continue;
        ++components;
        seen[v] = 1;
        frontier.push(v);
        while (!frontier.empty()) {
            const int a = frontier.front();
            frontier.pop();
            for (int b : adj[a])
                if (!seen[b] && sign[b] == sign[a]) {
                    seen[b] = 1;
                    frontier.push(b);
                }
        }
    }
    return components;
}

// Lattice-resolution diagnostic: number of vertices carrying the positive
// peak above the given height fraction. A peak the mesh cannot resolve
// collapses onto one or two vertices.
inline int peak_support_size(const Eigen::VectorXd& u, double fraction = 0.5) {
    const double top = u.size() > 0 ? u.maxCoeff() : 0.0;
    if (!(top > 0)) return 0;
    int count = 0;
    for (int v = 0; v < u.size(); ++v)
        if (u[v] >= fraction * top) ++count;
    return count;
}

// --- barycenter of the positive part ----------------------------------------

inline Eigen::Vector3d barycenter(const DiscreteForms& forms, const Eigen::VectorXd& u) {
    const SymmetricMesh& mesh = *forms.mesh;
    if (u.size() != mesh.num_vertices())
        throw std::invalid_argument("barycenter: field size mismatch");
    Eigen::Vector3d moment = Eigen::Vector3d::Zero();
    double total = 0.0;
    for (int v = 0; v < u.size(); ++v) {
        if (u[v] <= 0) continue;
        const double w = forms.lumped[v] * std::pow(u[v], forms.exponent);
        moment += w * mesh.vertices[v];
        total += w;
    }
    if (!(total > 0)) throw std::invalid_argument("barycenter: positive part vanishes");
    return moment / total;
}

// --- preconditioned MINRES on the energy-preconditioned Jacobian ------------

namespace detail {

struct MinresResult {
    int iterations = 0;
    double residual = 0.0;  // energy norm of J*delta - rhs, relative to rhs
    bool converged = false;
};

// Solves (B + shift*E) x = E*rhs for B = E - diag(weight), i.e. the Newton
// system J x = rhs with J = I - E^{-1} diag(weight) run as Krylov iteration on
// the E-preconditioned operator. Standard preconditioned MINRES recurrence;
// the eta scalar tracks the E-norm of the preconditioned residual.
inline MinresResult minres_energy(const DiscreteForms& forms, const Eigen::VectorXd& weight,
                                  const Eigen::VectorXd& rhs, double shift, Eigen::VectorXd& x,
                                  double tol = 1e-10, int max_iterations = 1000) {
    const auto apply = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
        Eigen::VectorXd out = forms.jacobian_apply(weight, z);
        if (shift != 0.0) out += shift * z;
        return out;
    };
    MinresResult result;
    x = Eigen::VectorXd::Zero(rhs.size());

    // v: residual-space vectors (E * preconditioned residual); z = E^{-1} v.
    Eigen::VectorXd v = forms.energy * rhs;  // residual of B x0 = E rhs at x0 = 0
    Eigen::VectorXd z = rhs;
    double gamma = std::sqrt(std::max(0.0, z.dot(v)));
    if (gamma == 0.0) {
        result.converged = true;
        return result;
    }
    const double rhs_norm = gamma;
    Eigen::VectorXd v_prev = Eigen::VectorXd::Zero(rhs.size());
    double gamma_prev = 1.0;
    double eta = gamma, s_prev = 0.0, s = 0.0, c_prev = 1.0, c = 1.0;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(rhs.size());
    Eigen::VectorXd w_prev = Eigen::VectorXd::Zero(rhs.size());

    for (int j = 1; j <= max_iterations; ++j) {
        z /= gamma;
        const Eigen::VectorXd az = forms.energy * apply(z);
        const double delta = z.dot(az);
        Eigen::VectorXd v_next = az - (delta / gamma) * v - (gamma / gamma_prev) * v_prev;
        Eigen::VectorXd z_next = forms.solve_energy(v_next);
        const double gamma_next = std::sqrt(std::max(0.0, z_next.dot(v_next)));

        const double a0 = c * delta - c_prev * s * gamma;
        const double a1 = std::sqrt(a0 * a0 + gamma_next * gamma_next);
        const double a2 = s * delta + c_prev * c * gamma;
        const double a3 = s_prev * gamma;
        if (!(a1 > 0)) break;  // exact breakdown: stationary point reached
        c_prev = c;
        s_prev = s;
        c = a0 / a1;
        s = gamma_next / a1;

        Eigen::VectorXd w_next = (z - a3 * w_prev - a2 * w) / a1;
        x += (c * eta) * w_next;
        eta = -s * eta;

        w_prev = std::move(w);
        w = std::move(w_next);
        v_prev = std::move(v);
        v = std::move(v_next);
        z = std::move(z_next);
        gamma_prev = gamma;
        gamma = gamma_next;

        result.iterations = j;
        result.residual = std::abs(eta) / rhs_norm;
        if (result.residual <= tol) {
            result.converged = true;
            break;
        }
        if (gamma == 0.0) {  // invariant subspace exhausted
            result.converged = result.residual <= tol;
            break;
        }
    }
    return result;
}

}  // namespace detail

// --- Newton solve ------------------------------------------------------------

// Energy-gradient Newton with backtracking on the residual norm and an
// escalating Tikhonov shift when the Jacobian is numerically singular (the
// expected situation at symmetric metrics). Every iterate is re-projected
// onto the equivariant subspace.
inline SolutionRecord newton_solve(const DiscreteForms& forms, const Eigen::VectorXd& u0,
                                   double tol = 1e-10, int max_iterations = 30,
                                   const std::string& metric_tag = "") {
    const SymmetricMesh& mesh = *forms.mesh;
    SolutionRecord rec;
    rec.eps = forms.eps;
    rec.metric_tag = metric_tag;

    Eigen::VectorXd u = project_equivariant(mesh, u0);
    Eigen::VectorXd grad = project_equivariant(mesh, forms.gradient(u));
    double res = std::sqrt(std::max(0.0, forms.energy_product(grad, grad)));
    double shift = 0.0;

    for (rec.iterations = 0; rec.iterations < max_iterations; ++rec.iterations) {
        if (res <= tol * std::max(1.0, std::sqrt(forms.energy_product(u, u)))) break;
        const Eigen::VectorXd weight = forms.jacobian_weight(u);

        bool stepped = false;
        while (!stepped) {
            Eigen::VectorXd delta;
            const auto lin = detail::minres_energy(forms, weight, grad, shift, delta);
            if (lin.converged) {
                delta = project_equivariant(mesh, delta);
                for (double step = 1.0; step > 1e-10; step *= 0.5) {
                    const Eigen::VectorXd cand = project_equivariant(mesh, u - step * delta);
                    const Eigen::VectorXd g2 = project_equivariant(mesh, forms.gradient(cand));
                    const double r2 = std::sqrt(std::max(0.0, forms.energy_product(g2, g2)));
                    if (r2 <= (1.0 - 1e-4 * step) * res) {
                        u = cand;
                        grad = g2;
                        res = r2;
                        stepped = true;
                        break;
                    }
                }
            }
            if (stepped) break;
            // Singular or stagnating Jacobian: regularize and retry.
            shift = (shift == 0.0) ? 1e-10 : shift * 100.0;
            rec.tikhonov_used = std::max(rec.tikhonov_used, shift);
            if (shift > 1e-2) break;  // degenerate point: give up, report
        }
        if (!stepped) break;
        if (shift > 1e-2) break;
        shift = 0.0;  // fresh attempt next iteration
    }

    rec.u = u;
    rec.residual_norm = res;
    rec.converged = res <= tol * std::max(1.0, std::sqrt(forms.energy_product(u, u)));
    rec.j_value = forms.functional(u);
    rec.nodal_domains = nodal_domains(mesh, u);
    rec.peak_core = peak_support_size(u);
    if ((u.array() > 0).any())
        rec.barycenter = barycenter(forms, u);
    return rec;
}

// --- linearized spectrum on the equivariant subspace -------------------------

namespace detail {

// Basis of the antisymmetric subspace: one column per mirror pair, +1 at the
// canonical vertex, -1 at its image.
inline SparseMat equivariant_basis(const SymmetricMesh& mesh) {
    const int n = mesh.num_vertices();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(n);
    int r = 0;
    for (int v = 0; v < n; ++v) {
        if (mesh.vertex_pair[v] < v) continue;
        trips.emplace_back(v, r, 1.0);
        trips.emplace_back(mesh.vertex_pair[v], r, -1.0);
        ++r;
    }
    SparseMat basis(n, r);
    basis.setFromTriplets(trips.begin(), trips.end());
    return basis;
}

}  // namespace detail

// Eigenvalues of (E - diag(weight)) v = lambda E v nearest zero, restricted to
// the equivariant subspace, by shift-invert Lanczos (full reorthogonalization)
// at shift zero. kernel_tol is relative to the largest computed |lambda|.
inline SpectrumReport linearized_spectrum(const DiscreteForms& forms, const Eigen::VectorXd& u,
                                          int n_eigs = 8, double kernel_tol = 1e-3) {
    if (n_eigs < 1) throw std::invalid_argument("linearized_spectrum: need n_eigs >= 1");
    SpectrumReport report;
    if (u.lpNorm<Eigen::Infinity>() == 0.0) {
        // Zero solution: the operator is the identity.
        report.eigenvalues.assign(static_cast<size_t>(n_eigs), 1.0);
        report.margin = 1.0;
        report.kernel_tol_used = kernel_tol;
        return report;
    }

    const SymmetricMesh& mesh = *forms.mesh;
    const SparseMat basis = detail::equivariant_basis(mesh);
    const Eigen::VectorXd weight = forms.jacobian_weight(u);
    SparseMat b_full = forms.energy;
    // subtract the diagonal weight
    {
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(weight.size());
        for (int v = 0; v < weight.size(); ++v) trips.emplace_back(v, v, weight[v]);
        SparseMat w_mat(weight.size(), weight.size());
        w_mat.setFromTriplets(trips.begin(), trips.end());
        b_full = b_full - w_mat;
    }
    const SparseMat b_red = basis.transpose() * b_full * basis;
    const SparseMat e_red = basis.transpose() * forms.energy * basis;

    Eigen::SimplicialLDLT<SparseMat> b_solver;
    double shift = 0.0;
    b_solver.compute(b_red);
    if (b_solver.info() != Eigen::Success) {
        // Exactly singular at shift zero: nudge and correct afterwards.
        shift = 1e-12;
        b_solver.compute(SparseMat(b_red + shift * e_red));
        if (b_solver.info() != Eigen::Success) {
            report.converged = false;
            return report;
        }
    }

    const int m_dim = static_cast<int>(b_red.rows());
    const int steps = std::min(m_dim, std::max(3 * n_eigs + 16, 40));

    // Lanczos on Op = (B + shift E)^{-1} E in the E-inner product.
    std::mt19937_64 rng(0x5eed0001ULL);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Eigen::VectorXd q = Eigen::VectorXd::NullaryExpr(m_dim, [&](Eigen::Index) { return unit(rng); });
    std::vector<Eigen::VectorXd> lanczos_basis;
    {
        const double norm0 = std::sqrt(q.dot(e_red * q));
        q /= norm0;
    }
    std::vector<double> alpha, beta;  // tridiagonal entries
    Eigen::VectorXd q_prev = Eigen::VectorXd::Zero(m_dim);
    double beta_prev = 0.0;
    for (int j = 0; j < steps; ++j) {
        lanczos_basis.push_back(q);
        Eigen::VectorXd w = b_solver.solve(e_red * q);
        const double a = w.dot(e_red * q);
        alpha.push_back(a);
        w -= a * q + beta_prev * q_prev;
        // full reorthogonalization in the E-inner product
        for (const auto& qi : lanczos_basis) w -= (w.dot(e_red * qi)) * qi;
        const double b = std::sqrt(std::max(0.0, w.dot(e_red * w)));
        if (b < 1e-13 || j == steps - 1) break;
        beta.push_back(b);
        q_prev = q;
        beta_prev = b;
        q = w / b;
    }

    const int m = static_cast<int>(alpha.size());
    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        tri(i, i) = alpha[static_cast<size_t>(i)];
        if (i + 1 < m) tri(i, i + 1) = tri(i + 1, i) = beta[static_cast<size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri_eigs(tri);
    if (tri_eigs.info() != Eigen::Success) {
        report.converged = false;
        return report;
    }

    // theta = 1/(lambda + shift): largest |theta| are nearest the shift.
    std::vector<double> lambdas;
    for (int i = 0; i < m; ++i) {
        const double theta = tri_eigs.eigenvalues()[i];
        if (theta != 0.0) lambdas.push_back(1.0 / theta - shift);
    }
    std::sort(lambdas.begin(), lambdas.end(),
              [](double a, double b) { return std::abs(a) < std::abs(b); });
    if (static_cast<int>(lambdas.size()) > n_eigs) lambdas.resize(static_cast<size_t>(n_eigs));
    report.eigenvalues = lambdas;

    double max_abs = 0.0;
    for (double l : lambdas) max_abs = std::max(max_abs, std::abs(l));
    report.kernel_tol_used = kernel_tol * max_abs;
    report.margin = std::numeric_limits<double>::infinity();
    for (double l : lambdas) {
        report.margin = std::min(report.margin, std::abs(l));
        if (std::abs(l) < report.kernel_tol_used) ++report.kernel_dim_estimate;
        if (l < -report.kernel_tol_used) ++report.morse_index;
    }
    return report;
}

// --- deflated multi-start search ---------------------------------------------

// Two records describe the same (u, -u) pair when their levels, barycenters
// (up to the sign flip), and sign-aligned fields all match.
inline bool same_solution_pair(const DiscreteForms& forms, const SolutionRecord& a,
                               const SolutionRecord& b) {
    const double j_scale = std::max(std::abs(a.j_value), std::abs(b.j_value));
    if (std::abs(a.j_value - b.j_value) > 1e-4 * std::max(j_scale, 1e-30)) return false;
    const double h = max_edge_length(*forms.mesh);
    const bool bary_match = (a.barycenter - b.barycenter).norm() <= h ||
                            (a.barycenter + b.barycenter).norm() <= h;
    if (!bary_match) return false;
    const double na = std::sqrt(forms.energy_product(a.u, a.u));
    const double nb = std::sqrt(forms.energy_product(b.u, b.u));
    const Eigen::VectorXd diff = a.u - b.u, sum = a.u + b.u;
    const double dist = std::min(std::sqrt(forms.energy_product(diff, diff)),
                                 std::sqrt(forms.energy_product(sum, sum)));
    return dist <= 1e-3 * std::max(na, nb);
}

struct SearchOutcome {
    std::vector<SolutionRecord> pairs;  // one representative per (u, -u) class
    int starts_attempted = 0;
    int starts_converged = 0;
};

inline SearchOutcome deflated_search(const DiscreteForms& forms,
                                     const std::vector<Eigen::VectorXd>& starts,
                                     double tol = 1e-10, int max_iterations = 30,
                                     const std::string& metric_tag = "") {
    if (starts.empty()) throw std::invalid_argument("deflated_search: no starts");
    SearchOutcome outcome;
    outcome.starts_attempted = static_cast<int>(starts.size());
    for (const auto& start : starts) {
        SolutionRecord rec = newton_solve(forms, start, tol, max_iterations, metric_tag);
        if (!rec.converged || rec.u.lpNorm<Eigen::Infinity>() == 0.0) continue;
        ++outcome.starts_converged;
        bool duplicate = false;
        for (const auto& kept : outcome.pairs)
            if (same_solution_pair(forms, kept, rec)) {
                duplicate = true;
                break;
            }
        if (!duplicate) outcome.pairs.push_back(std::move(rec));
    }
    return outcome;
}

// --- record export -----------------------------------------------------------

inline std::string solution_text_block(const SolutionRecord& rec) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "solution: eps=%.12g metric=%s\n", rec.eps,
                  rec.metric_tag.empty() ? "-" : rec.metric_tag.c_str());
    out << line;
    std::snprintf(line, sizeof line, "  J=%.12g residual=%.12g converged=%d iterations=%d\n",
                  rec.j_value, rec.residual_norm, rec.converged ? 1 : 0, rec.iterations);
    out << line;
    std::snprintf(line, sizeof line,
                  "  nodal_domains=%d peak_core=%d barycenter=(%.12g, %.12g, %.12g)\n",
                  rec.nodal_domains, rec.peak_core, rec.barycenter[0], rec.barycenter[1],
                  rec.barycenter[2]);
    out << line;
    if (!rec.spectrum.eigenvalues.empty()) {
        out << "  eigenvalues:";
        for (double l : rec.spectrum.eigenvalues) {
            std::snprintf(line, sizeof line, " %.12g", l);
            out << line;
        }
        std::snprintf(line, sizeof line, "\n  kernel_dim=%d morse_index=%d margin=%.12g\n",
                      rec.spectrum.kernel_dim_estimate, rec.spectrum.morse_index,
                      rec.spectrum.margin);
        out << line;
    }
    return out.str();
}

inline std::string solutions_csv_header() {
    return "eps,metric,J,residual,converged,nodal_domains,peak_core,bx,by,bz,kernel_dim,"
           "morse_index,margin,eig1,eig2,eig3,eig4,eig5,eig6,eig7,eig8\n";
}

inline std::string solution_csv_row(const SolutionRecord& rec) {
    std::ostringstream out;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.12g,", rec.eps);
    out << buf << (rec.metric_tag.empty() ? "-" : rec.metric_tag) << ",";
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%d,%d,%d,", rec.j_value, rec.residual_norm,
                  rec.converged ? 1 : 0, rec.nodal_domains, rec.peak_core);
    out << buf;
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,", rec.barycenter[0], rec.barycenter[1],
                  rec.barycenter[2]);
    out << buf;
    std::snprintf(buf, sizeof buf, "%d,%d,%.12g", rec.spectrum.kernel_dim_estimate,
                  rec.spectrum.morse_index, rec.spectrum.margin);
    out << buf;
    for (int i = 0; i < 8; ++i) {
        const double value = i < static_cast<int>(rec.spectrum.eigenvalues.size())
                                 ? rec.spectrum.eigenvalues[static_cast<size_t>(i)]
                                 : 0.0;
        std::snprintf(buf, sizeof buf, ",%.12g", value);
        out << buf;
    }
    out << "\n";
    return out.str();
}

}  // namespace equivar
