#include <catch2/catch_amalgamated.hpp>

#include <equivar/geodesic.hpp>
#include <equivar/mesh.hpp>
#include <equivar/tensor_field.hpp>

#include <numbers>

using namespace equivar;

namespace {

double sphere_fmm_error(int refinement, double dmin, double dmax) {
    const auto mesh = build_sphere(refinement);
    const auto g = conformal_tensor(mesh, 0.0);  // background metric
    const auto metric = metric_from_perturbation(mesh, g, 0.0);
    const auto dist = fast_marching_distances(mesh, metric, {0});
    double worst = 0.0;
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        const double exact = sphere_distance(mesh.vertices[0], mesh.vertices[v]);
        if (exact < dmin || exact > dmax) continue;
        worst = std::max(worst, std::abs(dist[v] - exact) / exact);
    }
    return worst;
}

}  // namespace

TEST_CASE("great-circle closed form") {
    const Eigen::Vector3d ex(1, 0, 0), ey(0, 1, 0);
    REQUIRE(sphere_distance(ex, ex) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(sphere_distance(ex, ey) == Catch::Approx(std::numbers::pi / 2));
    REQUIRE(sphere_distance(ex, -ex) == Catch::Approx(std::numbers::pi));
}

TEST_CASE("fast marching tracks great-circle distances") {
    // a few mesh rings from the source the plane-wave stencil carries a
    // self-similar error (it cannot see the front's curvature), so the global
    // relative sup plateaus; at fixed distance the error is first order
    REQUIRE(sphere_fmm_error(3, 0.05, 4.0) < 0.05);
    REQUIRE(sphere_fmm_error(4, 0.05, 4.0) < 0.05);
    const double far3 = sphere_fmm_error(3, 1.0, 3.0);
    const double far4 = sphere_fmm_error(4, 1.0, 3.0);
    REQUIRE(far3 < 0.03);
    REQUIRE(far4 < 0.8 * far3);
}

TEST_CASE("torus outer equator distances match the closed geodesic") {
    const double R = 2.0, r = 0.7;
    const int ref = 3;
    const auto mesh = build_torus(R, r, ref);
    const int ntheta = 12 << ref, nphi = 4 << ref;
    const auto metric = metric_from_perturbation(mesh, zero_tensor(mesh), 0.0);
    const auto dist = fast_marching_distances(mesh, metric, {0});  // vertex (theta=0, phi=0)
    for (int i = 1; i <= ntheta / 4; ++i) {
        const double exact = (2.0 * std::numbers::pi * i / ntheta) * (R + r);
        const double got = dist[static_cast<size_t>(i) * nphi];
        REQUIRE(std::abs(got - exact) / exact < 0.02);
    }
}

TEST_CASE("uniform conformal scaling rescales distances exactly") {
    const auto mesh = build_torus(2.0, 0.7, 2);
    const auto base = metric_from_perturbation(mesh, zero_tensor(mesh), 0.0);
    const auto scaled = metric_from_perturbation(mesh, conformal_tensor(mesh, 1.25), 1.0);
    const auto d1 = fast_marching_distances(mesh, base, {5});
    const auto d2 = fast_marching_distances(mesh, scaled, {5});
    for (int v = 0; v < mesh.num_vertices(); ++v)
        REQUIRE(d2[v] == Catch::Approx(1.5 * d1[v]).epsilon(1e-12).margin(1e-12));
}

TEST_CASE("perturbed-metric marching agrees with the deformed embedding") {
    // same connectivity twice: unit sphere carrying the pullback metric of
    // x -> diag(s) x, versus the actually deformed mesh with its own metric
    const int ref = 3;
    const Eigen::Vector3d s(1.0, 1.0, 1.3);
    const auto sphere = build_sphere(ref);
    const auto pullback = metric_from_perturbation(sphere, ellipsoidal_tensor(sphere, s), 1.0);
    const auto ellipsoid = build_ellipsoid(s.x(), s.y(), s.z(), ref);
    const auto background = metric_from_perturbation(ellipsoid, zero_tensor(ellipsoid), 0.0);
    const auto d1 = fast_marching_distances(sphere, pullback, {0});
    const auto d2 = fast_marching_distances(ellipsoid, background, {0});
    double dmax = 0.0;
    for (double d : d2) dmax = std::max(dmax, d);
    for (int v = 0; v < sphere.num_vertices(); ++v)
        REQUIRE(std::abs(d1[v] - d2[v]) < 0.015 * dmax);
}

TEST_CASE("antipodal source pairs give a symmetric distance field") {
    const auto mesh = build_sphere(2);
    const auto metric =
        metric_from_perturbation(mesh, ellipsoidal_tensor(mesh, {1.0, 1.1, 1.25}), 1.0);
    const int q = 3;
    const auto dist = fast_marching_distances(mesh, metric, {q, mesh.vertex_pair[q]});
    for (int v = 0; v < mesh.num_vertices(); ++v)
        REQUIRE(dist[v] == Catch::Approx(dist[mesh.vertex_pair[v]]).epsilon(1e-12).margin(1e-12));
}

TEST_CASE("dispatcher picks the closed form on the round sphere") {
    const auto mesh = build_sphere(2);
    const auto metric = metric_from_perturbation(mesh, zero_tensor(mesh), 0.0);
    const auto dist = distance_field(mesh, metric, 7);
    for (int v = 0; v < mesh.num_vertices(); ++v)
        REQUIRE(dist[v] == sphere_distance(mesh.vertices[7], mesh.vertices[v]));
}

TEST_CASE("nearest vertex lookup and input validation") {
    const auto mesh = build_sphere(1);
    for (int v : {0, 11, 25})
        REQUIRE(nearest_vertex(mesh, mesh.vertices[v] * 1.001) == v);
    const auto metric = metric_from_perturbation(mesh, zero_tensor(mesh), 0.0);
    REQUIRE_THROWS_AS(fast_marching_distances(mesh, metric, {}), std::invalid_argument);
    REQUIRE_THROWS_AS(fast_marching_distances(mesh, metric, {-1}), std::invalid_argument);
    const auto other = build_sphere(2);
    REQUIRE_THROWS_AS(fast_marching_distances(other, metric, {0}), std::invalid_argument);
}
