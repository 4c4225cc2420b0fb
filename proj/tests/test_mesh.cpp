#include <catch2/catch_amalgamated.hpp>

#include <equivar/mesh.hpp>

#include <filesystem>
#include <fstream>
#include <numbers>

using namespace equivar;

namespace {

void require_exact_symmetry(const SymmetricMesh& mesh) {
    const auto rep = check_involution(mesh);
    REQUIRE(rep.pairing_is_involution);
    REQUIRE(rep.triangles_paired);
    REQUIRE(rep.closed_manifold);
    REQUIRE(rep.max_coord_error == 0.0);  // bitwise antipodal pairs
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const int s = mesh.triangle_pair[t];
        for (int i = 0; i < 3; ++i)
            REQUIRE(mesh.triangles[s][i] == mesh.vertex_pair[mesh.triangles[t][i]]);
        // mirrored slot order makes the mirrored frame an exact negation
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 2; ++c)
                REQUIRE(mesh.frames[s](r, c) == -mesh.frames[t](r, c));
    }
}

void require_orthonormal_frames(const SymmetricMesh& mesh) {
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const Eigen::Matrix2d gram = mesh.frames[t].transpose() * mesh.frames[t];
        REQUIRE((gram - Eigen::Matrix2d::Identity()).norm() < 1e-14);
        const auto& tri = mesh.triangles[t];
        for (int k = 1; k < 3; ++k) {
            const Eigen::Vector3d d = mesh.vertices[tri[k]] - mesh.vertices[tri[0]];
            const Eigen::Vector3d residual = d - mesh.frames[t] * (mesh.frames[t].transpose() * d);
            REQUIRE(residual.norm() < 1e-12 * d.norm());
        }
    }
}

}  // namespace

TEST_CASE("icosphere counts, topology, and exact antipodal pairing") {
    for (int ref : {0, 1, 3}) {
        const auto mesh = build_sphere(ref);
        const int scale = 1 << (2 * ref);
        REQUIRE(mesh.num_vertices() == 10 * scale + 2);
        REQUIRE(mesh.num_triangles() == 20 * scale);
        REQUIRE(check_involution(mesh).euler_characteristic == 2);
        require_exact_symmetry(mesh);
        require_orthonormal_frames(mesh);
        for (const auto& v : mesh.vertices) REQUIRE(std::abs(v.norm() - 1.0) < 1e-14);
    }
}

TEST_CASE("icosphere spacing halves with each refinement") {
    const double h1 = max_edge_length(build_sphere(1));
    const double h2 = max_edge_length(build_sphere(2));
    const double h3 = max_edge_length(build_sphere(3));
    REQUIRE(h1 / h2 == Catch::Approx(2.0).margin(0.2));
    REQUIRE(h2 / h3 == Catch::Approx(2.0).margin(0.2));
}

TEST_CASE("ellipsoid keeps topology and symmetry, lands on the quadric") {
    const double a = 1.0, b = 1.0, c = 1.3;
    const auto mesh = build_ellipsoid(a, b, c, 2);
    REQUIRE(mesh.num_vertices() == 162);
    REQUIRE(check_involution(mesh).euler_characteristic == 2);
    require_exact_symmetry(mesh);
    require_orthonormal_frames(mesh);
    for (const auto& v : mesh.vertices) {
        const double q = (v.x() / a) * (v.x() / a) + (v.y() / b) * (v.y() / b) +
                         (v.z() / c) * (v.z() / c);
        REQUIRE(q == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("torus counts, genus, and exact antipodal pairing") {
    const double R = 2.0, r = 0.7;
    const auto mesh = build_torus(R, r, 2);
    REQUIRE(mesh.num_vertices() == 48 * 16);
    REQUIRE(mesh.num_triangles() == 2 * 48 * 16);
    REQUIRE(check_involution(mesh).euler_characteristic == 0);
    require_exact_symmetry(mesh);
    require_orthonormal_frames(mesh);
    for (const auto& v : mesh.vertices) {
        const double w = std::hypot(v.x(), v.y()) - R;
        REQUIRE(std::sqrt(w * w + v.z() * v.z()) == Catch::Approx(r).margin(1e-12));
    }
}

TEST_CASE("injectivity radius estimates match the closed forms") {
    REQUIRE(injectivity_estimate(build_sphere(0)) == Catch::Approx(std::numbers::pi));
    REQUIRE(injectivity_estimate(build_ellipsoid(1.0, 1.0, 1.3, 0)) ==
            Catch::Approx(std::numbers::pi / 1.3));
    REQUIRE(injectivity_estimate(build_torus(2.0, 0.7, 0)) ==
            Catch::Approx(0.7 * std::numbers::pi));
}

TEST_CASE("mesh file round trip is bitwise and validated") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto path = (dir / "equivar_mesh_roundtrip.off").string();
    const auto mesh = build_sphere(2);
    save_mesh(mesh, path);
    const auto loaded = load_mesh(path);
    REQUIRE(loaded.num_vertices() == mesh.num_vertices());
    REQUIRE(loaded.num_triangles() == mesh.num_triangles());
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        // %.17g survives the round trip exactly
        REQUIRE((loaded.vertices[v].array() == mesh.vertices[v].array()).all());
        REQUIRE(loaded.vertex_pair[v] == mesh.vertex_pair[v]);
    }
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        REQUIRE(loaded.triangles[t] == mesh.triangles[t]);
        REQUIRE(loaded.triangle_pair[t] == mesh.triangle_pair[t]);
    }
    REQUIRE(loaded.tag.kind == ManifoldTag::Kind::file);
    require_exact_symmetry(loaded);
    std::filesystem::remove(path);
}

TEST_CASE("mesh builders and loader reject invalid input") {
    REQUIRE_THROWS_AS(build_sphere(-1), std::invalid_argument);
    REQUIRE_THROWS_AS(build_ellipsoid(0.0, 1.0, 1.0, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(build_torus(0.7, 2.0, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(load_mesh("/nonexistent/mesh.off"), std::runtime_error);

    const auto dir = std::filesystem::temp_directory_path();
    const auto bad = (dir / "equivar_mesh_bad.off").string();
    {
        std::ofstream out(bad);
        out << "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\nPAIRING\n0\n1\n2\n";
    }
    // self-paired vertices are not a free involution
    REQUIRE_THROWS_AS(load_mesh(bad), std::runtime_error);
    std::filesystem::remove(bad);
}
