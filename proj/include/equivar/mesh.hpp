#pragma once

// Triangle meshes carrying a free isometric involution (the antipodal map
// x -> -x for every built-in). Vertices come in sigma-pairs whose coordinates
// are exact IEEE negations, and the image of triangle (a,b,c) is stored as
// (sigma a, sigma b, sigma c) in the same slot order, which makes the mirrored
// element frames exact negations as well. Downstream symmetry identities then
// hold bitwise, not merely to roundoff.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace equivar {

struct ManifoldTag {
    enum class Kind { sphere, ellipsoid, torus, file };
    Kind kind = Kind::file;
    double a = 1, b = 1, c = 1;  // ellipsoid semi-axes (unit sphere: all 1)
    double ring = 0, tube = 0;   // torus radii
    int refinement = 0;
    std::string source;  // path when kind == file
};

struct SymmetricMesh {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<int> vertex_pair;    // sigma as a fixed-point-free involution
    std::vector<int> triangle_pair;  // induced involution on triangles
    std::vector<Eigen::Matrix<double, 3, 2>> frames;  // orthonormal tangent frame per triangle
    ManifoldTag tag;

    int num_vertices() const { return static_cast<int>(vertices.size()); }
    int num_triangles() const { return static_cast<int>(triangles.size()); }
};

struct InvolutionReport {
    bool pairing_is_involution = false;  // sigma^2 = id, no fixed point
    bool triangles_paired = false;       // sigma maps the triangle set to itself
    bool closed_manifold = false;        // every edge bounds exactly two triangles
    double max_coord_error = std::numeric_limits<double>::infinity();  // sup |x_{sigma v} + x_v|
    int euler_characteristic = 0;
};

namespace detail {

inline std::uint64_t edge_key(int a, int b) {
    const std::uint64_t lo = static_cast<std::uint32_t>(std::min(a, b));
    const std::uint64_t hi = static_cast<std::uint32_t>(std::max(a, b));
    return (hi << 32) | lo;
}

inline void compute_frames(SymmetricMesh& mesh) {
    mesh.frames.resize(mesh.triangles.size());
    for (size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Eigen::Vector3d e1 = (mesh.vertices[tri[1]] - mesh.vertices[tri[0]]).normalized();
        const Eigen::Vector3d w = mesh.vertices[tri[2]] - mesh.vertices[tri[0]];
        const Eigen::Vector3d nrm = e1.cross(w).normalized();
        mesh.frames[t].col(0) = e1;
        mesh.frames[t].col(1) = nrm.cross(e1);
    }
}

// Pair triangles through the vertex pairing and rewrite each image triangle
// as the slotwise sigma-image of its partner, so mirrored frames negate.
inline void pair_triangles(SymmetricMesh& mesh, bool canonicalize_order) {
    std::map<std::array<int, 3>, int> by_vertex_set;
    for (size_t t = 0; t < mesh.triangles.size(); ++t) {
        std::array<int, 3> key = mesh.triangles[t];
        std::sort(key.begin(), key.end());
        by_vertex_set[key] = static_cast<int>(t);
    }
    mesh.triangle_pair.assign(mesh.triangles.size(), -1);
    for (size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        std::array<int, 3> img = {mesh.vertex_pair[tri[0]], mesh.vertex_pair[tri[1]],
                                  mesh.vertex_pair[tri[2]]};
        std::array<int, 3> key = img;
        std::sort(key.begin(), key.end());
        const auto it = by_vertex_set.find(key);
        if (it == by_vertex_set.end())
            throw std::runtime_error("mesh: triangle set is not involution invariant");
        mesh.triangle_pair[t] = it->second;
        if (canonicalize_order && static_cast<int>(t) < it->second)
            mesh.triangles[it->second] = img;
    }
}

}  // namespace detail

// Icosahedral subdivision sphere. refinement k: 10*4^k + 2 vertices.
inline SymmetricMesh build_sphere(int refinement) {
    if (refinement < 0 || refinement > 7)
        throw std::invalid_argument("build_sphere: refinement must lie in [0, 7]");
    SymmetricMesh mesh;
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    const Eigen::Vector3d base[6] = {{1, phi, 0}, {-1, phi, 0}, {0, 1, phi},
                                     {0, -1, phi}, {phi, 0, 1}, {-phi, 0, 1}};
    for (const auto& b : base) {
        const Eigen::Vector3d v = b.normalized();
        mesh.vertices.push_back(v);
        mesh.vertices.push_back(-v);
    }
    mesh.vertex_pair.resize(12);
    for (int i = 0; i < 12; ++i) mesh.vertex_pair[i] = i ^ 1;

    // recover the 20 faces as mutually adjacent triples at the edge distance
    double edge_len = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 12; ++i)
        for (int j = i + 1; j < 12; ++j)
            if (j != (i ^ 1))
                edge_len = std::min(edge_len, (mesh.vertices[i] - mesh.vertices[j]).norm());
    auto adjacent = [&](int i, int j) {
        return std::abs((mesh.vertices[i] - mesh.vertices[j]).norm() - edge_len) < 1e-9;
    };
    for (int i = 0; i < 12; ++i)
        for (int j = i + 1; j < 12; ++j)
            for (int k = j + 1; k < 12; ++k)
                if (adjacent(i, j) && adjacent(j, k) && adjacent(i, k)) {
                    std::array<int, 3> tri = {i, j, k};
                    const Eigen::Vector3d n = (mesh.vertices[j] - mesh.vertices[i])
                                                  .cross(mesh.vertices[k] - mesh.vertices[i]);
                    if (n.dot(mesh.vertices[i]) < 0.0) std::swap(tri[1], tri[2]);
                    mesh.triangles.push_back(tri);
                }
    if (mesh.triangles.size() != 20) throw std::runtime_error("build_sphere: icosahedron recovery failed");
    detail::pair_triangles(mesh, true);

    for (int level = 0; level < refinement; ++level) {
        std::unordered_map<std::uint64_t, int> midpoint;
        auto get_midpoint = [&](int a, int b) {
            const auto key = detail::edge_key(a, b);
            if (const auto it = midpoint.find(key); it != midpoint.end()) return it->second;
            const int sa = mesh.vertex_pair[a], sb = mesh.vertex_pair[b];
            const Eigen::Vector3d m =
                (0.5 * (mesh.vertices[a] + mesh.vertices[b])).normalized();
            const int idx = static_cast<int>(mesh.vertices.size());
            mesh.vertices.push_back(m);
            mesh.vertices.push_back(-m);
            mesh.vertex_pair.push_back(idx + 1);
            mesh.vertex_pair.push_back(idx);
            midpoint[key] = idx;
            midpoint[detail::edge_key(sa, sb)] = idx + 1;
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        std::vector<int> next_pair;
        for (size_t t = 0; t < mesh.triangles.size(); ++t) {
            if (mesh.triangle_pair[t] < static_cast<int>(t)) continue;
            const auto [a, b, c] = mesh.triangles[t];
            const int ab = get_midpoint(a, b), bc = get_midpoint(b, c), ca = get_midpoint(c, a);
            const std::array<std::array<int, 3>, 4> kids = {
                {{a, ab, ca}, {b, bc, ab}, {c, ca, bc}, {ab, bc, ca}}};
            const int base_idx = static_cast<int>(next.size());
            auto sig = [&](int v) { return mesh.vertex_pair[v]; };
            for (int k = 0; k < 4; ++k) next.push_back(kids[k]);
            for (int k = 0; k < 4; ++k)
                next.push_back({sig(kids[k][0]), sig(kids[k][1]), sig(kids[k][2])});
            for (int k = 0; k < 4; ++k) next_pair.push_back(base_idx + 4 + k);
            for (int k = 0; k < 4; ++k) next_pair.push_back(base_idx + k);
        }
        mesh.triangles = std::move(next);
        mesh.triangle_pair = std::move(next_pair);
    }
    detail::compute_frames(mesh);
    mesh.tag.kind = ManifoldTag::Kind::sphere;
    mesh.tag.refinement = refinement;
    return mesh;
}

inline SymmetricMesh build_ellipsoid(double a, double b, double c, int refinement) {
    if (!(a > 0) || !(b > 0) || !(c > 0))
        throw std::invalid_argument("build_ellipsoid: semi-axes must be positive");
    SymmetricMesh mesh = build_sphere(refinement);
    for (auto& v : mesh.vertices) v = Eigen::Vector3d(a * v.x(), b * v.y(), c * v.z());
    detail::compute_frames(mesh);
    mesh.tag.kind = ManifoldTag::Kind::ellipsoid;
    mesh.tag.a = a;
    mesh.tag.b = b;
    mesh.tag.c = c;
    return mesh;
}

// Structured (theta, phi) grid torus, ring radius R, tube radius r.
// The antipodal map sends (theta, phi) to (theta + pi, -phi).
inline SymmetricMesh build_torus(double R, double r, int refinement) {
    if (!(R > r) || !(r > 0))
        throw std::invalid_argument("build_torus: need R > r > 0");
    if (refinement < 0 || refinement > 7)
        throw std::invalid_argument("build_torus: refinement must lie in [0, 7]");
    const int ntheta = 12 << refinement;
    const int nphi = 4 << refinement;
    const int h = ntheta / 2;
    SymmetricMesh mesh;
    mesh.vertices.resize(static_cast<size_t>(ntheta) * nphi);
    mesh.vertex_pair.resize(mesh.vertices.size());
    auto vid = [&](int i, int j) {
        return ((i % ntheta + ntheta) % ntheta) * nphi + ((j % nphi + nphi) % nphi);
    };
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < nphi; ++j) {
            const double theta = 2.0 * std::numbers::pi * i / ntheta;
            const double phi = 2.0 * std::numbers::pi * j / nphi;
            const double w = R + r * std::cos(phi);
            const Eigen::Vector3d x(w * std::cos(theta), w * std::sin(theta), r * std::sin(phi));
            const int v = vid(i, j), s = vid(i + h, nphi - j);
            mesh.vertices[v] = x;
            mesh.vertices[s] = -x;
            mesh.vertex_pair[v] = s;
            mesh.vertex_pair[s] = v;
        }
    auto sig = [&](int v) { return mesh.vertex_pair[v]; };
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < nphi; ++j) {
            std::array<std::array<int, 3>, 2> quad;
            if (j % 2 == 0) {
                quad = {{{vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)},
                         {vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)}}};
            } else {
                quad = {{{vid(i, j), vid(i + 1, j), vid(i, j + 1)},
                         {vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)}}};
            }
            const int base_idx = static_cast<int>(mesh.triangles.size());
            for (const auto& tri : quad) mesh.triangles.push_back(tri);
            for (const auto& tri : quad)
                mesh.triangles.push_back({sig(tri[0]), sig(tri[1]), sig(tri[2])});
            mesh.triangle_pair.push_back(base_idx + 2);
            mesh.triangle_pair.push_back(base_idx + 3);
            mesh.triangle_pair.push_back(base_idx + 0);
            mesh.triangle_pair.push_back(base_idx + 1);
        }
    detail::compute_frames(mesh);
    mesh.tag.kind = ManifoldTag::Kind::torus;
    mesh.tag.ring = R;
    mesh.tag.tube = r;
    mesh.tag.refinement = refinement;
    return mesh;
}

inline InvolutionReport check_involution(const SymmetricMesh& mesh) {
    InvolutionReport rep;
    const int nv = mesh.num_vertices();
    rep.pairing_is_involution = static_cast<int>(mesh.vertex_pair.size()) == nv;
    rep.max_coord_error = 0.0;
    for (int v = 0; v < nv && rep.pairing_is_involution; ++v) {
        const int s = mesh.vertex_pair[v];
        if (s < 0 || s >= nv || s == v || mesh.vertex_pair[s] != v) {
            rep.pairing_is_involution = false;
            break;
        }
        rep.max_coord_error = std::max(
            rep.max_coord_error, (mesh.vertices[s] + mesh.vertices[v]).lpNorm<Eigen::Infinity>());
    }

    rep.triangles_paired = !mesh.triangle_pair.empty();
    for (size_t t = 0; t < mesh.triangles.size() && rep.triangles_paired; ++t) {
        const int s = mesh.triangle_pair[t];
        if (s < 0 || s >= mesh.num_triangles() || mesh.triangle_pair[s] != static_cast<int>(t)) {
            rep.triangles_paired = false;
            break;
        }
        std::array<int, 3> img = {mesh.vertex_pair[mesh.triangles[t][0]],
                                  mesh.vertex_pair[mesh.triangles[t][1]],
                                  mesh.vertex_pair[mesh.triangles[t][2]]};
        std::array<int, 3> got = mesh.triangles[s];
        std::sort(img.begin(), img.end());
        std::sort(got.begin(), got.end());
        if (img != got) rep.triangles_paired = false;
    }

    std::unordered_map<std::uint64_t, int> edge_count;
    for (const auto& tri : mesh.triangles)
        for (int e = 0; e < 3; ++e) ++edge_count[detail::edge_key(tri[e], tri[(e + 1) % 3])];
    rep.closed_manifold = !edge_count.empty();
    for (const auto& [key, cnt] : edge_count)
        if (cnt != 2) rep.closed_manifold = false;
    rep.euler_characteristic =
        nv - static_cast<int>(edge_count.size()) + mesh.num_triangles();
    return rep;
}

inline double max_edge_length(const SymmetricMesh& mesh) {
    double worst = 0.0;
    for (const auto& tri : mesh.triangles)
        for (int e = 0; e < 3; ++e)
            worst = std::max(worst,
                             (mesh.vertices[tri[e]] - mesh.vertices[tri[(e + 1) % 3]]).norm());
    return worst;
}

// Conservative injectivity radius estimate used for default bubble radii.
// Sphere/ellipsoid: pi / sqrt(max Gauss curvature) = pi * ab / c for sorted
// semi-axes a <= b <= c; torus: min of the tube half-loop and the inner gap.
inline double injectivity_estimate(const SymmetricMesh& mesh) {
    switch (mesh.tag.kind) {
        case ManifoldTag::Kind::sphere:
            return std::numbers::pi;
        case ManifoldTag::Kind::ellipsoid: {
            std::array<double, 3> ax = {mesh.tag.a, mesh.tag.b, mesh.tag.c};
            std::sort(ax.begin(), ax.end());
            return std::numbers::pi * ax[0] * ax[1] / ax[2];
        }
        case ManifoldTag::Kind::torus:
            return std::numbers::pi * std::min(mesh.tag.tube, mesh.tag.ring - mesh.tag.tube);
        case ManifoldTag::Kind::file:
            // no curvature information; let the pair distance govern bubble radii
            return std::numeric_limits<double>::infinity();
    }
    return std::numeric_limits<double>::infinity();
}

inline void save_mesh(const SymmetricMesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_mesh: cannot open " + path);
    out << "OFF\n" << mesh.num_vertices() << " " << mesh.num_triangles() << " 0\n";
    char buf[160];
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", v.x(), v.y(), v.z());
        out << buf;
    }
    for (const auto& t : mesh.triangles)
        out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
    out << "PAIRING\n";
    for (int s : mesh.vertex_pair) out << s << "\n";
    if (!out) throw std::runtime_error("save_mesh: write failed for " + path);
}

inline SymmetricMesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_mesh: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "OFF") throw std::runtime_error("load_mesh: missing OFF header in " + path);
    int nv = 0, nt = 0, ne = 0;
    in >> nv >> nt >> ne;
    if (nv <= 0 || nt <= 0) throw std::runtime_error("load_mesh: bad counts in " + path);
    SymmetricMesh mesh;
    mesh.vertices.resize(nv);
    for (auto& v : mesh.vertices) in >> v.x() >> v.y() >> v.z();
    mesh.triangles.resize(nt);
    for (auto& t : mesh.triangles) {
        int deg = 0;
        in >> deg >> t[0] >> t[1] >> t[2];
        if (deg != 3) throw std::runtime_error("load_mesh: non-triangle face in " + path);
    }
    in >> magic;
    if (magic != "PAIRING") throw std::runtime_error("load_mesh: missing PAIRING section in " + path);
    mesh.vertex_pair.resize(nv);
    for (auto& s : mesh.vertex_pair) in >> s;
    if (!in) throw std::runtime_error("load_mesh: truncated file " + path);

    detail::pair_triangles(mesh, false);
    detail::compute_frames(mesh);
    mesh.tag.kind = ManifoldTag::Kind::file;
    mesh.tag.source = path;
    const auto rep = check_involution(mesh);
    if (!rep.pairing_is_involution || !rep.triangles_paired)
        throw std::runtime_error("load_mesh: pairing is not a free involution in " + path);
    if (rep.max_coord_error > 1e-9)
        throw std::runtime_error("load_mesh: vertex pairs are not antipodal in " + path);
    return mesh;
}

}  // namespace equivar
