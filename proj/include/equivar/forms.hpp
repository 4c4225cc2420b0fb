#pragma once

// P1 finite element forms on a SymmetricMesh with a per-element metric:
// stiffness K, consistent mass M, lumped vertex masses, and the scaled
// combinations used by the concentration functional
//
//   E(u,v) = K(u,v) + M(u,v)/eps^2        (the energy inner product)
//   G(u,v) = M(u,v)/eps^2
//   N(u)   = sum_v m_v |u_v|^p / eps^2    (lumped p-th power)
//   J(u)   = E(u,u)/2 - N(u)/p
//
// The signed involution (S u)_v = -u_{sigma v} commutes with K, M, E exactly
// (max |S A S - A| == 0): elements are assembled in canonical mirror pairs,
// the mirrored element reuses the bitwise-identical local matrix of its
// partner, and global accumulation runs in a stable sorted order so mirrored
// entries sum the same value sequences. This holds whenever the metric field
// itself is bitwise mirror-invariant (all recipe fields are); otherwise the
// assembler transparently falls back to recomputing mirrored elements.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <equivar/mesh.hpp>
#include <equivar/tensor_field.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

namespace equivar {

using SparseMat = Eigen::SparseMatrix<double>;

inline Eigen::VectorXd s_apply(const SymmetricMesh& mesh, const Eigen::VectorXd& u) {
    Eigen::VectorXd out(u.size());
    for (int v = 0; v < u.size(); ++v) out[v] = -u[mesh.vertex_pair[v]];
    return out;
}

// Orthogonal projection onto the equivariant subspace {u : S u = u}.
inline Eigen::VectorXd project_equivariant(const SymmetricMesh& mesh, const Eigen::VectorXd& u) {
    return 0.5 * (u + s_apply(mesh, u));
}

inline double equivariance_defect(const SymmetricMesh& mesh, const Eigen::VectorXd& u) {
    return (u - s_apply(mesh, u)).lpNorm<Eigen::Infinity>();
}

namespace detail {

struct ElementData {
    Eigen::Matrix<double, 2, 3> grads;  // P1 shape gradients, frame coordinates
    double flat_area;                   // area in frame coordinates (metric-free)
};

inline ElementData element_data(const SymmetricMesh& mesh, int t) {
    const auto& tri = mesh.triangles[t];
    const auto& frame = mesh.frames[t];
    Eigen::Matrix2d dm;
    dm.col(0) = frame.transpose() * (mesh.vertices[tri[1]] - mesh.vertices[tri[0]]);
    dm.col(1) = frame.transpose() * (mesh.vertices[tri[2]] - mesh.vertices[tri[0]]);
    ElementData ed;
    ed.flat_area = 0.5 * dm.determinant();
    if (!(ed.flat_area > 0)) throw std::runtime_error("element_data: degenerate triangle");
    const Eigen::Matrix2d inv_t = dm.inverse().transpose();
    ed.grads.col(1) = inv_t.col(0);
    ed.grads.col(2) = inv_t.col(1);
    ed.grads.col(0) = -(ed.grads.col(1) + ed.grads.col(2));
    return ed;
}

struct Trip {
    int r, c;
    double v;
};

// Deterministic duplicate reduction: stable sort keeps emission order within
// each entry, so mirrored entries (fed identical value sequences) sum bitwise
// equal. The resulting triplet list is duplicate-free.
inline SparseMat reduce_triplets(int n, std::vector<Trip>& trips) {
    std::stable_sort(trips.begin(), trips.end(), [](const Trip& a, const Trip& b) {
        return a.c < b.c || (a.c == b.c && a.r < b.r);
    });
    std::vector<Eigen::Triplet<double>> uniq;
    uniq.reserve(trips.size());
    for (size_t i = 0; i < trips.size();) {
        double sum = 0.0;
        const size_t j = i;
        while (i < trips.size() && trips[i].r == trips[j].r && trips[i].c == trips[j].c)
            sum += trips[i++].v;
        uniq.emplace_back(trips[j].r, trips[j].c, sum);
    }
    SparseMat mat(n, n);
    mat.setFromTriplets(uniq.begin(), uniq.end());
    return mat;
}

// Assemble sum_T local(T) over canonical mirror pairs. When exact_mirror is
// set the mirrored element reuses its partner's local matrix (bitwise equal by
// frame construction); otherwise it is recomputed from its own data.
inline SparseMat assemble_pairwise(const SymmetricMesh& mesh,
                                   const std::function<Eigen::Matrix3d(int)>& local,
                                   bool exact_mirror) {
    std::vector<Trip> trips;
    trips.reserve(mesh.triangles.size() * 9);
    auto emit = [&](int t, const Eigen::Matrix3d& loc) {
        const auto& tri = mesh.triangles[t];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) trips.push_back({tri[i], tri[j], loc(i, j)});
    };
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const int s = mesh.triangle_pair[t];
        if (s < t) continue;
        const Eigen::Matrix3d loc = local(t);
        emit(t, loc);
        if (s != t) emit(s, exact_mirror ? loc : local(s));
    }
    return reduce_triplets(mesh.num_vertices(), trips);
}

inline bool metric_mirrors_bitwise(const SymmetricMesh& mesh, const TensorField& metric) {
    for (int t = 0; t < mesh.num_triangles(); ++t)
        if (!(metric.values[t].array() == metric.values[mesh.triangle_pair[t]].array()).all())
            return false;
    return true;
}

}  // namespace detail

struct DiscreteForms {
    const SymmetricMesh* mesh = nullptr;
    double eps = 1.0;
    double exponent = 4.0;  // p
    SparseMat stiffness;    // K
    SparseMat mass;         // consistent M
    SparseMat energy;       // E = K + M/eps^2
    Eigen::VectorXd lumped; // vertex masses m_v
    std::shared_ptr<Eigen::SimplicialLLT<SparseMat>> energy_solver;

    int size() const { return static_cast<int>(lumped.size()); }

    double energy_product(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
        return u.dot(energy * v);
    }
    double l2_product(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
        return u.dot(mass * v) / (eps * eps);
    }
    // N(u): lumped p-th power with the concentration scaling
    double lp_integral(const Eigen::VectorXd& u) const {
        return (lumped.array() * u.array().abs().pow(exponent)).sum() / (eps * eps);
    }
    double functional(const Eigen::VectorXd& u) const {
        return 0.5 * energy_product(u, u) - lp_integral(u) / exponent;
    }
    Eigen::VectorXd solve_energy(const Eigen::VectorXd& rhs) const {
        return energy_solver->solve(rhs);
    }
    // compact operator A = E^{-1} G; self-adjoint in the energy inner product
    Eigen::VectorXd apply_compact(const Eigen::VectorXd& u) const {
        return solve_energy(mass * u / (eps * eps));
    }
    // lumped load of the nonlinearity, |u|^{p-2} u against vertex masses
    Eigen::VectorXd nonlinear_load(const Eigen::VectorXd& u) const {
        return (lumped.array() * u.array().abs().pow(exponent - 2.0) * u.array()) / (eps * eps);
    }
    // F(u) = u - E^{-1} nonlinear_load(u): the gradient of J in the E product
    Eigen::VectorXd gradient(const Eigen::VectorXd& u) const {
        return u - solve_energy(nonlinear_load(u));
    }
    // diagonal weight of the linearized problem: F'(u) v = v - E^{-1}(d .* v)
    Eigen::VectorXd jacobian_weight(const Eigen::VectorXd& u) const {
        return (exponent - 1.0) * (lumped.array() * u.array().abs().pow(exponent - 2.0)) /
               (eps * eps);
    }
    Eigen::VectorXd jacobian_apply(const Eigen::VectorXd& weight, const Eigen::VectorXd& v) const {
        return v - solve_energy(weight.cwiseProduct(v));
    }
};

inline DiscreteForms assemble_forms(const SymmetricMesh& mesh, const TensorField& metric,
                                    double eps, double p) {
    if (!(eps > 0)) throw std::invalid_argument("assemble_forms: eps must be positive");
    if (!(p > 2)) throw std::invalid_argument("assemble_forms: exponent must exceed 2");
    if (metric.size() != mesh.num_triangles())
        throw std::invalid_argument("assemble_forms: metric/mesh size mismatch");

    const bool exact = detail::metric_mirrors_bitwise(mesh, metric);
    auto stiffness_local = [&](int t) -> Eigen::Matrix3d {
        const auto ed = detail::element_data(mesh, t);
        const auto& g = metric.values[t];
        const double area = ed.flat_area * std::sqrt(g.determinant());
        return area * ed.grads.transpose() * g.inverse() * ed.grads;
    };
    auto mass_local = [&](int t) -> Eigen::Matrix3d {
        const auto ed = detail::element_data(mesh, t);
        const double area = ed.flat_area * std::sqrt(metric.values[t].determinant());
        Eigen::Matrix3d m = Eigen::Matrix3d::Ones() * (area / 12.0);
        m.diagonal().array() *= 2.0;
        return m;
    };

    DiscreteForms forms;
    forms.mesh = &mesh;
    forms.eps = eps;
    forms.exponent = p;
    forms.stiffness = detail::assemble_pairwise(mesh, stiffness_local, exact);
    forms.mass = detail::assemble_pairwise(mesh, mass_local, exact);
    forms.energy = forms.stiffness + forms.mass * (1.0 / (eps * eps));

    forms.lumped = Eigen::VectorXd::Zero(mesh.num_vertices());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const int s = mesh.triangle_pair[t];
        if (s < t) continue;
        const double share =
            detail::element_data(mesh, t).flat_area *
            std::sqrt(metric.values[t].determinant()) / 3.0;
        for (int k = 0; k < 3; ++k) forms.lumped[mesh.triangles[t][k]] += share;
        if (s != t) {
            const double mirror_share =
                exact ? share
                      : detail::element_data(mesh, s).flat_area *
                            std::sqrt(metric.values[s].determinant()) / 3.0;
            for (int k = 0; k < 3; ++k) forms.lumped[mesh.triangles[s][k]] += mirror_share;
        }
    }

    forms.energy_solver = std::make_shared<Eigen::SimplicialLLT<SparseMat>>();
    forms.energy_solver->compute(forms.energy);
    if (forms.energy_solver->info() != Eigen::Success)
        throw std::runtime_error("assemble_forms: energy form is not positive definite");
    return forms;
}

// sup |(S A S - A)| over the joint sparsity pattern; exactly zero for the
// forms assembled above on a bitwise mirror-invariant metric.
inline double commutation_error(const SymmetricMesh& mesh, const SparseMat& mat) {
    double worst = 0.0;
    for (int outer = 0; outer < mat.outerSize(); ++outer)
        for (SparseMat::InnerIterator it(mat, outer); it; ++it) {
            const double mirrored =
                mat.coeff(mesh.vertex_pair[it.row()], mesh.vertex_pair[it.col()]);
            worst = std::max(worst, std::abs(it.value() - mirrored));
        }
    return worst;
}

}  // namespace equivar
