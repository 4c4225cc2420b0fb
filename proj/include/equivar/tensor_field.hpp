#pragma once

// Symmetric 2-tensor fields on a SymmetricMesh, stored piecewise constant in
// each triangle's orthonormal frame. The embedded (induced) metric is exactly
// the identity in those coordinates, so a perturbed metric is I + s*h with h
// one of the recipe fields below. Invariance under the involution compares
// h_T against the pullback of h_{sigma T} through the frame transfer map.

#include <Eigen/Dense>

#include <equivar/mesh.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace equivar {

struct TensorField {
    std::vector<Eigen::Matrix2d> values;  // symmetric, frame coordinates

    int size() const { return static_cast<int>(values.size()); }
};

// Frame transfer of the involution on triangle t: the differential of x -> -x
// expressed from the frame of t to the frame of sigma(t). Orthogonal. When the
// mirrored frame is the exact negation (true for every built-in mesh by
// construction) the transfer is the identity in exact arithmetic; returning it
// directly instead of forming F^T F keeps pullbacks bitwise exact.
inline Eigen::Matrix2d sigma_transfer(const SymmetricMesh& mesh, int t) {
    const auto& ft = mesh.frames[t];
    const auto& fs = mesh.frames[mesh.triangle_pair[t]];
    if ((fs.array() == (-ft).array()).all()) return Eigen::Matrix2d::Identity();
    return fs.transpose() * (-ft);
}

inline TensorField zero_tensor(const SymmetricMesh& mesh) {
    TensorField h;
    h.values.assign(mesh.triangles.size(), Eigen::Matrix2d::Zero());
    return h;
}

// Conformal direction alpha * g (the background metric is I in frame coords).
inline TensorField conformal_tensor(const SymmetricMesh& mesh, double alpha) {
    TensorField h;
    h.values.assign(mesh.triangles.size(), alpha * Eigen::Matrix2d::Identity());
    return h;
}

// Pure shear supported on two Gaussian bumps centred at q and its antipode,
// so the field is even under the involution by construction.
inline TensorField shear_bump_tensor(const SymmetricMesh& mesh, const Eigen::Vector3d& q,
                                     double amp, double width) {
    if (!(width > 0)) throw std::invalid_argument("shear_bump_tensor: width must be positive");
    TensorField h;
    h.values.resize(mesh.triangles.size());
    Eigen::Matrix2d shear;
    shear << 0, 1, 1, 0;
    for (size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Eigen::Vector3d c =
            (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]) / 3.0;
        const double a = amp * (std::exp(-(c - q).squaredNorm() / (width * width)) +
                                std::exp(-(c + q).squaredNorm() / (width * width)));
        h.values[t] = a * shear;
    }
    return h;
}

// Pullback of the flat metric through x -> diag(s) x, minus the background:
// h_T = F_T^T (diag(s)^2 - I) F_T. Turns the unit sphere into an ellipsoid
// with semi-axes s while keeping the mesh (and the involution) fixed.
inline TensorField ellipsoidal_tensor(const SymmetricMesh& mesh, const Eigen::Vector3d& scales) {
    if (!(scales.minCoeff() > 0))
        throw std::invalid_argument("ellipsoidal_tensor: scales must be positive");
    TensorField h;
    h.values.resize(mesh.triangles.size());
    const Eigen::Matrix3d big =
        scales.array().square().matrix().asDiagonal().toDenseMatrix() - Eigen::Matrix3d::Identity();
    for (size_t t = 0; t < mesh.triangles.size(); ++t)
        h.values[t] = mesh.frames[t].transpose() * big * mesh.frames[t];
    return h;
}

inline double sigma_invariance_error(const SymmetricMesh& mesh, const TensorField& h) {
    double worst = 0.0;
    for (int t = 0; t < h.size(); ++t) {
        const Eigen::Matrix2d q = sigma_transfer(mesh, t);
        const Eigen::Matrix2d pulled = q.transpose() * h.values[mesh.triangle_pair[t]] * q;
        worst = std::max(worst, (h.values[t] - pulled).lpNorm<Eigen::Infinity>());
    }
    return worst;
}

// Average each element value with the pullback of its mirror. Idempotent, and
// exact (bitwise no-op on already-invariant fields) when the transfer is I.
inline void symmetrize_tensor(const SymmetricMesh& mesh, TensorField& h) {
    std::vector<Eigen::Matrix2d> out(h.values.size());
    for (int t = 0; t < h.size(); ++t) {
        const Eigen::Matrix2d q = sigma_transfer(mesh, t);
        out[t] = 0.5 * (h.values[t] + q.transpose() * h.values[mesh.triangle_pair[t]] * q);
    }
    h.values = std::move(out);
}

inline double tensor_sup_norm(const TensorField& h) {
    double worst = 0.0;
    for (const auto& m : h.values) worst = std::max(worst, m.lpNorm<Eigen::Infinity>());
    return worst;
}

// Perturbed metric I + s*h, rejected unless positive definite on every element.
inline TensorField metric_from_perturbation(const SymmetricMesh& mesh, const TensorField& h,
                                            double s) {
    if (h.size() != mesh.num_triangles())
        throw std::invalid_argument("metric_from_perturbation: field/mesh size mismatch");
    TensorField g;
    g.values.resize(h.values.size());
    for (size_t t = 0; t < h.values.size(); ++t) {
        g.values[t] = Eigen::Matrix2d::Identity() + s * h.values[t];
        if (!(g.values[t].determinant() > 0) || !(g.values[t].trace() > 0))
            throw std::runtime_error("metric_from_perturbation: metric lost positivity");
    }
    return g;
}

inline void save_tensor(const TensorField& h, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_tensor: cannot open " + path);
    out << "# symmetric 2-tensor, element-frame coordinates, rows: h11 h12 h22\n";
    out << h.size() << "\n";
    char buf[120];
    for (const auto& m : h.values) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", m(0, 0), m(0, 1), m(1, 1));
        out << buf;
    }
    if (!out) throw std::runtime_error("save_tensor: write failed for " + path);
}

inline TensorField load_tensor(const std::string& path, const SymmetricMesh& mesh) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_tensor: cannot open " + path);
    std::string line;
    std::getline(in, line);
    if (line.empty() || line[0] != '#')
        throw std::runtime_error("load_tensor: missing convention header in " + path);
    int n = 0;
    in >> n;
    if (n != mesh.num_triangles())
        throw std::runtime_error("load_tensor: element count does not match mesh in " + path);
    TensorField h;
    h.values.resize(n);
    for (auto& m : h.values) {
        double h11, h12, h22;
        in >> h11 >> h12 >> h22;
        m << h11, h12, h12, h22;
    }
    if (!in) throw std::runtime_error("load_tensor: truncated file " + path);
    return h;
}

}  // namespace equivar
