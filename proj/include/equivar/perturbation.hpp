#pragma once

// Directional derivatives of the scaled forms in the joint parameter (eps,
// metric). For a direction (de, h) at base point (eps, g), with n = 2:
//
//   dE(u,v) = (1/(2 eps^n)) int tr(g^-1 h) u v dmu
//           + (1/eps^(n-2))  int grad(u)^T bt(h) grad(v) dmu
//           - (n de/eps^(n+1)) int u v dmu
//           - ((n-2) de/eps^(n-1)) int <grad u, grad v> dmu
//   dG(u,v) = first and third terms of dE
//   dN(u)   = lumped analogue for the p-th power term
//   dA(u)   : E (A' u) = dG(u, .) - dE(A u, .)
//
// The gradient contraction uses bt(h) = 1/2 tr(g^-1 h) g^-1 - g^-1 h g^-1,
// the unique convention that matches d/dt of the assembled stiffness (the
// finite-difference harness below pins it down). The b_tensor operation is
// also exposed in its reference lower-index form b(h) = 1/2 tr(g^-1 h) g -
// g^-1 h g^-1, which differs from bt by raising through g; only bt enters the
// assembled derivatives.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <equivar/forms.hpp>
#include <equivar/mesh.hpp>
#include <equivar/tensor_field.hpp>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace equivar {

inline constexpr int kSurfaceDim = 2;  // n in all scaling exponents

struct Direction {
    double d_eps = 0.0;
    TensorField d_h;  // empty means the zero tensor direction
};

inline TensorField b_tensor(const TensorField& g, const TensorField& h) {
    if (g.size() != h.size()) throw std::invalid_argument("b_tensor: size mismatch");
    TensorField b;
    b.values.resize(g.values.size());
    for (size_t t = 0; t < g.values.size(); ++t) {
        const Eigen::Matrix2d& gt = g.values[t];
        if (!(gt.determinant() > 0)) throw std::runtime_error("b_tensor: singular metric element");
        const Eigen::Matrix2d gi = gt.inverse();
        b.values[t] = 0.5 * (gi * h.values[t]).trace() * gt - gi * h.values[t] * gi;
    }
    return b;
}

namespace detail {

inline bool direction_has_tensor(const Direction& dir) { return !dir.d_h.values.empty(); }

// derivative of the element area factor: d sqrt(det g) = 1/2 tr(g^-1 h) sqrt(det g)
inline double trace_rate(const Eigen::Matrix2d& g, const Eigen::Matrix2d& h) {
    return 0.5 * (g.inverse() * h).trace();
}

}  // namespace detail

// d/dt of the stiffness matrix for g + t*h: per element, area * grads^T bt grads
inline SparseMat d_stiffness(const SymmetricMesh& mesh, const TensorField& metric,
                             const TensorField& dh) {
    if (metric.size() != mesh.num_triangles() || dh.size() != mesh.num_triangles())
        throw std::invalid_argument("d_stiffness: field/mesh size mismatch");
    const bool exact = detail::metric_mirrors_bitwise(mesh, metric) &&
                       detail::metric_mirrors_bitwise(mesh, dh);
    auto local = [&](int t) -> Eigen::Matrix3d {
        const auto ed = detail::element_data(mesh, t);
        const Eigen::Matrix2d& g = metric.values[t];
        const Eigen::Matrix2d& h = dh.values[t];
        const Eigen::Matrix2d gi = g.inverse();
        const Eigen::Matrix2d bt = 0.5 * (gi * h).trace() * gi - gi * h * gi;
        const double area = ed.flat_area * std::sqrt(g.determinant());
        return area * ed.grads.transpose() * bt * ed.grads;
    };
    return detail::assemble_pairwise(mesh, local, exact);
}

// d/dt of the consistent mass matrix for g + t*h
inline SparseMat d_mass(const SymmetricMesh& mesh, const TensorField& metric,
                        const TensorField& dh) {
    if (metric.size() != mesh.num_triangles() || dh.size() != mesh.num_triangles())
        throw std::invalid_argument("d_mass: field/mesh size mismatch");
    const bool exact = detail::metric_mirrors_bitwise(mesh, metric) &&
                       detail::metric_mirrors_bitwise(mesh, dh);
    auto local = [&](int t) -> Eigen::Matrix3d {
        const auto ed = detail::element_data(mesh, t);
        const Eigen::Matrix2d& g = metric.values[t];
        const double darea = ed.flat_area * std::sqrt(g.determinant()) *
                             detail::trace_rate(g, dh.values[t]);
        Eigen::Matrix3d m = Eigen::Matrix3d::Ones() * (darea / 12.0);
        m.diagonal().array() *= 2.0;
        return m;
    };
    return detail::assemble_pairwise(mesh, local, exact);
}

// d/dt of the lumped vertex masses
inline Eigen::VectorXd d_lumped(const SymmetricMesh& mesh, const TensorField& metric,
                                const TensorField& dh) {
    if (metric.size() != mesh.num_triangles() || dh.size() != mesh.num_triangles())
        throw std::invalid_argument("d_lumped: field/mesh size mismatch");
    Eigen::VectorXd dm = Eigen::VectorXd::Zero(mesh.num_vertices());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto ed = detail::element_data(mesh, t);
        const double share = ed.flat_area * std::sqrt(metric.values[t].determinant()) *
                             detail::trace_rate(metric.values[t], dh.values[t]) / 3.0;
        for (int k = 0; k < 3; ++k) dm[mesh.triangles[t][k]] += share;
    }
    return dm;
}

inline double dE(const DiscreteForms& forms, const TensorField& metric, const Direction& dir,
                 const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    const double eps = forms.eps;
    double out = 0.0;
    if (detail::direction_has_tensor(dir)) {
        const SparseMat dm = d_mass(*forms.mesh, metric, dir.d_h);
        const SparseMat dk = d_stiffness(*forms.mesh, metric, dir.d_h);
        out += u.dot(dm * v) / std::pow(eps, kSurfaceDim);
        out += u.dot(dk * v) / std::pow(eps, kSurfaceDim - 2);
    }
    if (dir.d_eps != 0.0) {
        out -= kSurfaceDim * dir.d_eps / std::pow(eps, kSurfaceDim + 1) * u.dot(forms.mass * v);
        out -= (kSurfaceDim - 2) * dir.d_eps / std::pow(eps, kSurfaceDim - 1) *
               u.dot(forms.stiffness * v);
    }
    return out;
}

inline double dG(const DiscreteForms& forms, const TensorField& metric, const Direction& dir,
                 const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    const double eps = forms.eps;
    double out = 0.0;
    if (detail::direction_has_tensor(dir))
        out += u.dot(d_mass(*forms.mesh, metric, dir.d_h) * v) / std::pow(eps, kSurfaceDim);
    if (dir.d_eps != 0.0)
        out -= kSurfaceDim * dir.d_eps / std::pow(eps, kSurfaceDim + 1) * u.dot(forms.mass * v);
    return out;
}

inline double dN(const DiscreteForms& forms, const TensorField& metric, const Direction& dir,
                 const Eigen::VectorXd& u) {
    const double eps = forms.eps;
    const Eigen::ArrayXd up = u.array().abs().pow(forms.exponent);
    double out = 0.0;
    if (detail::direction_has_tensor(dir))
        out += (d_lumped(*forms.mesh, metric, dir.d_h).array() * up).sum() /
               std::pow(eps, kSurfaceDim);
    if (dir.d_eps != 0.0)
        out -= kSurfaceDim * dir.d_eps / std::pow(eps, kSurfaceDim + 1) *
               (forms.lumped.array() * up).sum();
    return out;
}

// Direction derivative of the compact operator: E (A' u) = dG(u, .) - dE(A u, .)
inline Eigen::VectorXd dA(const DiscreteForms& forms, const TensorField& metric,
                          const Direction& dir, const Eigen::VectorXd& u) {
    const double eps = forms.eps;
    const Eigen::VectorXd au = forms.apply_compact(u);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(u.size());
    if (detail::direction_has_tensor(dir)) {
        const SparseMat dm = d_mass(*forms.mesh, metric, dir.d_h);
        const SparseMat dk = d_stiffness(*forms.mesh, metric, dir.d_h);
        rhs += dm * u / std::pow(eps, kSurfaceDim);
        rhs -= dm * au / std::pow(eps, kSurfaceDim);
        rhs -= dk * au / std::pow(eps, kSurfaceDim - 2);
    }
    if (dir.d_eps != 0.0) {
        const double c = kSurfaceDim * dir.d_eps / std::pow(eps, kSurfaceDim + 1);
        rhs -= c * (forms.mass * u);
        rhs += c * (forms.mass * au);
        rhs += (kSurfaceDim - 2) * dir.d_eps / std::pow(eps, kSurfaceDim - 1) *
               (forms.stiffness * au);
    }
    return forms.solve_energy(rhs);
}

// ---------------------------------------------------------------------------
// finite-difference validation harness

struct FdReport {
    int trials = 0;
    double worst_energy = 0.0;   // dE vs central difference
    double worst_mass = 0.0;     // dG
    double worst_power = 0.0;    // dN
    double worst_compact = 0.0;  // dA, energy norm
    bool pass = false;
};

namespace detail {

inline TensorField shifted_metric(const TensorField& g, const TensorField& h, double t) {
    TensorField out = g;
    for (size_t i = 0; i < out.values.size(); ++i) out.values[i] += t * h.values[i];
    return out;
}

}  // namespace detail

// Central differences with one Richardson step (t and t/2) for every
// derivative, against fresh assemblies at the shifted parameters.
inline FdReport fd_validate(const SymmetricMesh& mesh, const TensorField& metric, double eps,
                            double p, double tol, int trials, unsigned seed) {
    FdReport rep;
    rep.trials = trials;
    const auto forms = assemble_forms(mesh, metric, eps, p);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double t0 = 1e-5;

    for (int trial = 0; trial < trials; ++trial) {
        Eigen::VectorXd u(forms.size()), v(forms.size());
        for (int i = 0; i < forms.size(); ++i) u[i] = unit(rng);
        for (int i = 0; i < forms.size(); ++i) v[i] = unit(rng);
        Direction dir;
        dir.d_eps = 0.3 * unit(rng) * eps;
        dir.d_h = zero_tensor(mesh);
        for (auto& m : dir.d_h.values) {
            const double a = 0.4 * unit(rng), b = 0.4 * unit(rng), c = 0.4 * unit(rng);
            m << a, b, b, c;
        }
        symmetrize_tensor(mesh, dir.d_h);

        struct Shifted {
            double e, g, n;
            Eigen::VectorXd a;
        };
        auto eval = [&](double t) -> Shifted {
            const auto f = assemble_forms(mesh, detail::shifted_metric(metric, dir.d_h, t),
                                          eps + t * dir.d_eps, p);
            return {f.energy_product(u, v), f.l2_product(u, v), f.lp_integral(u),
                    f.apply_compact(u)};
        };
        const Shifted sp = eval(t0), sm = eval(-t0), sp2 = eval(t0 / 2), sm2 = eval(-t0 / 2);
        auto rich = [&](double f1p, double f1m, double f2p, double f2m) {
            const double d1 = (f1p - f1m) / (2.0 * t0);
            const double d2 = (f2p - f2m) / t0;
            return (4.0 * d2 - d1) / 3.0;
        };

        auto rel = [](double got, double want) {
            return std::abs(got - want) / std::max({std::abs(got), std::abs(want), 1e-8});
        };
        rep.worst_energy =
            std::max(rep.worst_energy, rel(dE(forms, metric, dir, u, v),
                                           rich(sp.e, sm.e, sp2.e, sm2.e)));
        rep.worst_mass = std::max(
            rep.worst_mass, rel(dG(forms, metric, dir, u, v), rich(sp.g, sm.g, sp2.g, sm2.g)));
        rep.worst_power = std::max(
            rep.worst_power, rel(dN(forms, metric, dir, u), rich(sp.n, sm.n, sp2.n, sm2.n)));

        const Eigen::VectorXd fd_a =
            (4.0 * (sp2.a - sm2.a) / t0 - (sp.a - sm.a) / (2.0 * t0)) / 3.0;
        const Eigen::VectorXd an_a = dA(forms, metric, dir, u);
        const double na = std::sqrt(forms.energy_product(an_a - fd_a, an_a - fd_a));
        const double nf = std::sqrt(forms.energy_product(fd_a, fd_a));
        rep.worst_compact = std::max(rep.worst_compact, na / std::max(nf, 1e-8));
    }
    rep.pass = rep.worst_energy <= tol && rep.worst_mass <= tol && rep.worst_power <= tol &&
               rep.worst_compact <= tol;
    return rep;
}

}  // namespace equivar
