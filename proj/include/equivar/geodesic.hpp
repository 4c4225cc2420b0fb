#pragma once

// Geodesic distance fields. Two engines: a closed form for the round sphere
// with the background metric, and fast marching over the triangulation for
// everything else. The marcher works with intrinsic per-element metrics: each
// local update needs only the Gram matrix of the two known-vertex directions,
// so a perturbed metric g_T enters through dot products d^T g_T e and no
// planar unfolding is required.

#include <Eigen/Dense>

#include <equivar/mesh.hpp>
#include <equivar/tensor_field.hpp>

#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

namespace equivar {

inline double sphere_distance(const Eigen::Vector3d& x, const Eigen::Vector3d& y) {
    return std::atan2(x.cross(y).norm(), x.dot(y));
}

inline int nearest_vertex(const SymmetricMesh& mesh, const Eigen::Vector3d& point) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        const double d = (mesh.vertices[v] - point).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = v;
        }
    }
    return best;
}

namespace detail {

// Distance at the apex C of a metric triangle from values at A and B, given
// the metric Gram data gaa = |CA|^2, gbb = |CB|^2, gab = <CA, CB>. Solves for
// the planar wave T = t + n.x with |n|_g = 1 matching T(A), T(B); accepts the
// root only when the virtual source direction lies in the cone at C, else
// falls back to the Dijkstra edge update.
inline double apex_update(double ta, double tb, double gaa, double gab, double gbb) {
    const double edge = std::min(ta + std::sqrt(gaa), tb + std::sqrt(gbb));
    if (!std::isfinite(ta) || !std::isfinite(tb)) return edge;
    const double det = gaa * gbb - gab * gab;
    if (!(det > 0)) return edge;
    const double a2 = (gaa + gbb - 2.0 * gab) / det;        // 1^T C 1
    const double b1 = ((gbb - gab) * ta + (gaa - gab) * tb) / det;  // 1^T C s
    const double c0 =
        (gbb * ta * ta - 2.0 * gab * ta * tb + gaa * tb * tb) / det - 1.0;  // s^T C s - 1
    const double disc = b1 * b1 - a2 * c0;
    if (disc < 0) return edge;
    const double t = (b1 + std::sqrt(disc)) / a2;
    const double lam_a = gbb * (t - ta) - gab * (t - tb);
    const double lam_b = gaa * (t - tb) - gab * (t - ta);
    if (t >= ta && t >= tb && lam_a >= 0 && lam_b >= 0) return t;
    return edge;
}

// Metric length of the chord between two vertices, measured inside triangle t.
inline double chord_length(const SymmetricMesh& mesh, const TensorField& metric, int t, int a,
                           int b) {
    const Eigen::Vector2d d = mesh.frames[t].transpose() * (mesh.vertices[b] - mesh.vertices[a]);
    return std::sqrt(d.dot(metric.values[t] * d));
}

}  // namespace detail

// First-arrival distances from the source set, fast marching with per-element
// metrics (frame coordinates, SPD). The plane-wave update underlying the
// marcher cannot represent the strongly curved front right at a point source,
// so the two-ring neighbourhood of each source is seeded exactly by unfolding
// adjacent triangle strips; without this the second ring inherits an O(1)
// relative error that then advects outward.
inline std::vector<double> fast_marching_distances(const SymmetricMesh& mesh,
                                                   const TensorField& metric,
                                                   const std::vector<int>& sources) {
    const int nv = mesh.num_vertices();
    if (metric.size() != mesh.num_triangles())
        throw std::invalid_argument("fast_marching_distances: metric/mesh size mismatch");
    if (sources.empty())
        throw std::invalid_argument("fast_marching_distances: no sources");

    std::vector<std::vector<int>> incident(nv);
    for (int t = 0; t < mesh.num_triangles(); ++t)
        for (int k = 0; k < 3; ++k) incident[mesh.triangles[t][k]].push_back(t);

    std::vector<double> dist(nv, std::numeric_limits<double>::infinity());
    std::vector<char> frozen(nv, 0);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (int s : sources) {
        if (s < 0 || s >= nv) throw std::invalid_argument("fast_marching_distances: bad source");
        dist[s] = 0.0;
        heap.emplace(0.0, s);
    }

    std::unordered_map<std::uint64_t, std::array<int, 2>> edge_tris;
    for (int t = 0; t < mesh.num_triangles(); ++t)
        for (int k = 0; k < 3; ++k) {
            auto& slot = edge_tris[detail::edge_key(mesh.triangles[t][k],
                                                    mesh.triangles[t][(k + 1) % 3])];
            if (slot[0] == 0 && slot[1] == 0) slot = {-1, -1};
            (slot[0] < 0 ? slot[0] : slot[1]) = t;
        }
    auto seed = [&](int v, double d) {
        if (d < dist[v]) {
            dist[v] = d;
            heap.emplace(d, v);
        }
    };
    for (int s : sources) {
        for (int t : incident[s]) {
            const auto& tri = mesh.triangles[t];
            int k = 0;
            while (tri[k] != s) ++k;
            const int a = tri[(k + 1) % 3], b = tri[(k + 2) % 3];
            const double la = detail::chord_length(mesh, metric, t, s, a);
            const double lb = detail::chord_length(mesh, metric, t, s, b);
            const double lab = detail::chord_length(mesh, metric, t, a, b);
            seed(a, la);
            seed(b, lb);
            // unfold the neighbour across (a,b); seed its apex if the straight
            // segment from the source crosses that edge
            const auto& pair_t = edge_tris[detail::edge_key(a, b)];
            const int tn = pair_t[0] == t ? pair_t[1] : pair_t[0];
            if (tn < 0) continue;
            const auto& trin = mesh.triangles[tn];
            int c = trin[0];
            for (int j = 0; j < 3; ++j)
                if (trin[j] != a && trin[j] != b) c = trin[j];
            const double ma = detail::chord_length(mesh, metric, tn, a, c);
            const double mb = detail::chord_length(mesh, metric, tn, b, c);
            auto clamp1 = [](double x) { return std::min(1.0, std::max(-1.0, x)); };
            const double ca = clamp1((la * la + lab * lab - lb * lb) / (2.0 * la * lab));
            const double cb = clamp1((ma * ma + lab * lab - mb * mb) / (2.0 * ma * lab));
            const Eigen::Vector2d ps(la * ca, la * std::sqrt(1.0 - ca * ca));
            const Eigen::Vector2d pc(ma * cb, -ma * std::sqrt(1.0 - cb * cb));
            if (ps.y() - pc.y() <= 0) continue;
            const double cross_x =
                (ps.x() * (-pc.y()) + pc.x() * ps.y()) / (ps.y() - pc.y());
            if (cross_x >= 0 && cross_x <= lab) seed(c, (ps - pc).norm());
        }
    }

    while (!heap.empty()) {
        const auto [d, v] = heap.top();
        heap.pop();
        if (frozen[v] || d > dist[v]) continue;
        frozen[v] = 1;
        for (int t : incident[v]) {
            const auto& tri = mesh.triangles[t];
            const auto& frame = mesh.frames[t];
            const auto& g = metric.values[t];
            for (int k = 0; k < 3; ++k) {
                const int c = tri[k];
                if (frozen[c]) continue;
                const int a = tri[(k + 1) % 3], b = tri[(k + 2) % 3];
                const Eigen::Vector2d da =
                    frame.transpose() * (mesh.vertices[a] - mesh.vertices[c]);
                const Eigen::Vector2d db =
                    frame.transpose() * (mesh.vertices[b] - mesh.vertices[c]);
                const double cand = detail::apex_update(dist[a], dist[b], da.dot(g * da),
                                                        da.dot(g * db), db.dot(g * db));
                if (cand < dist[c]) {
                    dist[c] = cand;
                    heap.emplace(cand, c);
                }
            }
        }
    }
    return dist;
}

// Dispatcher used by the higher-level modules: exact great-circle formula on
// the round sphere with the unperturbed metric, fast marching otherwise.
inline std::vector<double> distance_field(const SymmetricMesh& mesh, const TensorField& metric,
                                          int source) {
    if (mesh.tag.kind == ManifoldTag::Kind::sphere) {
        bool background = true;
        for (const auto& m : metric.values)
            if ((m - Eigen::Matrix2d::Identity()).lpNorm<Eigen::Infinity>() != 0.0) {
                background = false;
                break;
            }
        if (background) {
            std::vector<double> dist(mesh.num_vertices());
            for (int v = 0; v < mesh.num_vertices(); ++v)
                dist[v] = sphere_distance(mesh.vertices[source], mesh.vertices[v]);
            return dist;
        }
    }
    return fast_marching_distances(mesh, metric, {source});
}

}  // namespace equivar
