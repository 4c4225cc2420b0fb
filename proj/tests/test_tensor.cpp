#include <catch2/catch_amalgamated.hpp>

#include <equivar/mesh.hpp>
#include <equivar/tensor_field.hpp>

#include <filesystem>
#include <random>

using namespace equivar;

TEST_CASE("frame transfer of the involution is exactly the identity on built-ins") {
    for (const auto& mesh : {build_sphere(2), build_torus(2.0, 0.7, 1)}) {
        for (int t = 0; t < mesh.num_triangles(); ++t) {
            const Eigen::Matrix2d q = sigma_transfer(mesh, t);
            REQUIRE((q - Eigen::Matrix2d::Identity()).lpNorm<Eigen::Infinity>() == 0.0);
        }
    }
}

TEST_CASE("frame transfer stays orthogonal when mirrored slot order is scrambled") {
    auto mesh = build_sphere(1);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        if (mesh.triangle_pair[t] < t) continue;
        auto& mirror = mesh.triangles[mesh.triangle_pair[t]];
        std::rotate(mirror.begin(), mirror.begin() + 1, mirror.end());
    }
    detail::compute_frames(mesh);
    double max_dev = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const Eigen::Matrix2d q = sigma_transfer(mesh, t);
        REQUIRE((q.transpose() * q - Eigen::Matrix2d::Identity()).lpNorm<Eigen::Infinity>() <
                1e-13);
        max_dev = std::max(max_dev, (q - Eigen::Matrix2d::Identity()).lpNorm<Eigen::Infinity>());
    }
    REQUIRE(max_dev > 0.5);  // genuinely rotated transfers, not the fast path
    // isotropic fields are invariant under any orthogonal transfer
    REQUIRE(sigma_invariance_error(mesh, conformal_tensor(mesh, 0.3)) < 1e-14);
    // the scaling pullback transforms correctly through the rotated frames too
    auto h = ellipsoidal_tensor(mesh, {1.0, 1.0, 1.3});
    REQUIRE(sigma_invariance_error(mesh, h) < 1e-13);
}

TEST_CASE("recipe fields are exactly invariant under the involution") {
    const auto mesh = build_sphere(2);
    const Eigen::Vector3d q(0.2, -0.4, 1.0);
    REQUIRE(sigma_invariance_error(mesh, conformal_tensor(mesh, 0.3)) == 0.0);
    REQUIRE(sigma_invariance_error(mesh, shear_bump_tensor(mesh, q, 0.1, 0.5)) == 0.0);
    REQUIRE(sigma_invariance_error(mesh, ellipsoidal_tensor(mesh, {1.0, 1.0, 1.3})) == 0.0);

    const auto torus = build_torus(2.0, 0.7, 1);
    REQUIRE(sigma_invariance_error(torus, shear_bump_tensor(torus, {2.7, 0.0, 0.0}, 0.1, 0.8)) ==
            0.0);
}

TEST_CASE("symmetrisation kills asymmetry and is idempotent") {
    const auto mesh = build_sphere(1);
    TensorField h = zero_tensor(mesh);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& m : h.values) {
        const double a = dist(rng), b = dist(rng), c = dist(rng);
        m << a, b, b, c;
    }
    REQUIRE(sigma_invariance_error(mesh, h) > 0.1);  // generic noise is not invariant
    symmetrize_tensor(mesh, h);
    REQUIRE(sigma_invariance_error(mesh, h) == 0.0);
    TensorField again = h;
    symmetrize_tensor(mesh, again);
    for (int t = 0; t < h.size(); ++t)
        REQUIRE((again.values[t].array() == h.values[t].array()).all());
}

TEST_CASE("ellipsoidal field reproduces the pullback metric of the scaling map") {
    const auto mesh = build_sphere(2);
    const Eigen::Vector3d scales(0.9, 1.1, 1.3);
    const auto h = ellipsoidal_tensor(mesh, scales);
    const auto g = metric_from_perturbation(mesh, h, 1.0);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int t = static_cast<int>(rng() % mesh.num_triangles());
        const Eigen::Vector2d d(dist(rng), dist(rng));
        const Eigen::Vector3d mapped = scales.asDiagonal() * (mesh.frames[t] * d);
        const double quad = d.dot(g.values[t] * d);
        REQUIRE(quad == Catch::Approx(mapped.squaredNorm()).epsilon(1e-13));
    }
}

TEST_CASE("conformal field scales the metric and positivity is enforced") {
    const auto mesh = build_sphere(1);
    const auto h = conformal_tensor(mesh, 0.3);
    REQUIRE(tensor_sup_norm(h) == Catch::Approx(0.3));
    const auto g = metric_from_perturbation(mesh, h, 2.0);
    for (const auto& m : g.values)
        REQUIRE((m - 1.6 * Eigen::Matrix2d::Identity()).lpNorm<Eigen::Infinity>() < 1e-15);
    REQUIRE_THROWS_AS(metric_from_perturbation(mesh, h, -4.0), std::runtime_error);
}

TEST_CASE("tensor file round trip is bitwise and validated") {
    const auto mesh = build_sphere(1);
    auto h = shear_bump_tensor(mesh, {0.0, 0.0, 1.0}, 0.2, 0.6);
    const auto dir = std::filesystem::temp_directory_path();
    const auto path = (dir / "equivar_tensor_roundtrip.dat").string();
    save_tensor(h, path);
    const auto loaded = load_tensor(path, mesh);
    REQUIRE(loaded.size() == h.size());
    for (int t = 0; t < h.size(); ++t)
        REQUIRE((loaded.values[t].array() == h.values[t].array()).all());
    const auto coarse = build_sphere(0);
    REQUIRE_THROWS_AS(load_tensor(path, coarse), std::runtime_error);
    std::filesystem::remove(path);
    REQUIRE_THROWS_AS(load_tensor(path, mesh), std::runtime_error);
    REQUIRE_THROWS_AS(shear_bump_tensor(mesh, {0, 0, 1}, 0.1, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(ellipsoidal_tensor(mesh, {1.0, -1.0, 1.0}), std::invalid_argument);
}
