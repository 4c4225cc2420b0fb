#include <catch2/catch_amalgamated.hpp>

#include <equivar/forms.hpp>
#include <equivar/mesh.hpp>
#include <equivar/perturbation.hpp>
#include <equivar/tensor_field.hpp>

#include <random>

using namespace equivar;

namespace {

TensorField background(const SymmetricMesh& mesh) {
    return metric_from_perturbation(mesh, zero_tensor(mesh), 0.0);
}

Eigen::VectorXd random_vector(int n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Eigen::VectorXd u(n);
    for (int i = 0; i < n; ++i) u[i] = dist(rng);
    return u;
}

TensorField random_symmetric_field(const SymmetricMesh& mesh, unsigned seed, double amp) {
    TensorField h = zero_tensor(mesh);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-amp, amp);
    for (auto& m : h.values) {
        const double a = dist(rng), b = dist(rng), c = dist(rng);
        m << a, b, b, c;
    }
    symmetrize_tensor(mesh, h);
    return h;
}

}  // namespace

TEST_CASE("reference b-tensor values") {
    const auto mesh = build_sphere(0);
    TensorField g = background(mesh);

    // identity direction on the identity metric: b = (1/2)*2*I - I = 0
    auto b = b_tensor(g, conformal_tensor(mesh, 1.0));
    for (const auto& m : b.values) REQUIRE(m.lpNorm<Eigen::Infinity>() < 1e-15);

    // traceless direction: b = -h
    TensorField h = zero_tensor(mesh);
    for (auto& m : h.values) m << 0.7, 0.0, 0.0, -0.7;
    b = b_tensor(g, h);
    for (const auto& m : b.values) {
        REQUIRE(m(0, 0) == Catch::Approx(-0.7).margin(1e-15));
        REQUIRE(m(1, 1) == Catch::Approx(0.7).margin(1e-15));
        REQUIRE(m(0, 1) == Catch::Approx(0.0).margin(1e-15));
    }

    // hand matrix arithmetic: g = 2I, h = I gives b = (3/4) I
    TensorField g2 = conformal_tensor(mesh, 2.0);
    b = b_tensor(g2, conformal_tensor(mesh, 1.0));
    for (const auto& m : b.values)
        REQUIRE((m - 0.75 * Eigen::Matrix2d::Identity()).lpNorm<Eigen::Infinity>() < 1e-15);

    TensorField singular = zero_tensor(mesh);
    REQUIRE_THROWS_AS(b_tensor(singular, conformal_tensor(mesh, 1.0)), std::runtime_error);
}

TEST_CASE("scaling identities in the eps direction") {
    const auto mesh = build_sphere(2);
    const auto metric = background(mesh);
    const double eps = 0.6;
    const auto forms = assemble_forms(mesh, metric, eps, 4.0);

    Direction dir;
    dir.d_eps = 0.17;

    // constants kill the gradient terms: dE = -(n de/eps) G(c,c)
    const Eigen::VectorXd c = Eigen::VectorXd::Constant(forms.size(), 1.3);
    REQUIRE(dE(forms, metric, dir, c, c) ==
            Catch::Approx(-2.0 * dir.d_eps / eps * forms.l2_product(c, c)).epsilon(1e-12));

    // G and N are (-n)-homogeneous in eps
    const Eigen::VectorXd u = random_vector(forms.size(), 31);
    const Eigen::VectorXd v = random_vector(forms.size(), 32);
    REQUIRE(dG(forms, metric, dir, u, v) ==
            Catch::Approx(-2.0 * dir.d_eps / eps * forms.l2_product(u, v)).epsilon(1e-12));
    REQUIRE(dN(forms, metric, dir, u) ==
            Catch::Approx(-2.0 * dir.d_eps / eps * forms.lp_integral(u)).epsilon(1e-12));

    // zero direction gives exact zeros
    Direction zero;
    REQUIRE(dE(forms, metric, zero, u, v) == 0.0);
    REQUIRE(dG(forms, metric, zero, u, v) == 0.0);
    REQUIRE(dN(forms, metric, zero, u) == 0.0);
    REQUIRE(dA(forms, metric, zero, u).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("conformal direction acts on G through the trace") {
    const auto mesh = build_sphere(2);
    // non-trivial base metric to make the identity meaningful
    const auto metric = metric_from_perturbation(mesh, ellipsoidal_tensor(mesh, {1.0, 1.1, 1.3}), 1.0);
    const auto forms = assemble_forms(mesh, metric, 0.8, 4.0);
    const double c = 0.37;
    Direction dir;
    dir.d_h.values.resize(metric.values.size());
    for (size_t t = 0; t < metric.values.size(); ++t) dir.d_h.values[t] = c * metric.values[t];
    const Eigen::VectorXd u = random_vector(forms.size(), 41);
    const Eigen::VectorXd v = random_vector(forms.size(), 42);
    REQUIRE(dG(forms, metric, dir, u, v) ==
            Catch::Approx(c * forms.l2_product(u, v)).epsilon(1e-12));
    // and the conformal direction is stiffness-neutral on surfaces: bt = 0
    REQUIRE(dE(forms, metric, dir, u, v) ==
            Catch::Approx(c * forms.l2_product(u, v)).epsilon(1e-10));
}

TEST_CASE("disjoint supports decouple in dG") {
    const auto mesh = build_sphere(2);
    const auto metric = background(mesh);
    const auto forms = assemble_forms(mesh, metric, 1.0, 4.0);
    Direction dir;
    dir.d_h = random_symmetric_field(mesh, 9, 0.3);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(forms.size());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(forms.size());
    u[0] = 1.0;
    v[mesh.vertex_pair[0]] = 1.0;  // antipodal vertices never share an element
    REQUIRE(dG(forms, metric, dir, u, v) == 0.0);
}

TEST_CASE("derivatives are linear in the direction and symmetric in the fields") {
    const auto mesh = build_sphere(1);
    const auto metric = background(mesh);
    const auto forms = assemble_forms(mesh, metric, 0.7, 4.0);
    const Eigen::VectorXd u = random_vector(forms.size(), 51);
    const Eigen::VectorXd v = random_vector(forms.size(), 52);

    Direction d1, d2, sum;
    d1.d_eps = 0.11;
    d1.d_h = random_symmetric_field(mesh, 13, 0.3);
    d2.d_eps = -0.23;
    d2.d_h = random_symmetric_field(mesh, 14, 0.3);
    sum.d_eps = d1.d_eps + d2.d_eps;
    sum.d_h = d1.d_h;
    for (size_t t = 0; t < sum.d_h.values.size(); ++t) sum.d_h.values[t] += d2.d_h.values[t];

    REQUIRE(dE(forms, metric, sum, u, v) ==
            Catch::Approx(dE(forms, metric, d1, u, v) + dE(forms, metric, d2, u, v))
                .epsilon(1e-12));
    REQUIRE(dG(forms, metric, sum, u, v) ==
            Catch::Approx(dG(forms, metric, d1, u, v) + dG(forms, metric, d2, u, v))
                .epsilon(1e-12));
    REQUIRE(dN(forms, metric, sum, u) ==
            Catch::Approx(dN(forms, metric, d1, u) + dN(forms, metric, d2, u)).epsilon(1e-12));

    REQUIRE(dE(forms, metric, d1, u, v) == Catch::Approx(dE(forms, metric, d1, v, u)).epsilon(1e-12));
    REQUIRE(dG(forms, metric, d1, u, v) == Catch::Approx(dG(forms, metric, d1, v, u)).epsilon(1e-12));
}

TEST_CASE("derivative matrices inherit exact involution commutation") {
    const auto mesh = build_torus(2.0, 0.7, 1);
    const auto metric =
        metric_from_perturbation(mesh, shear_bump_tensor(mesh, {2.7, 0, 0}, 0.15, 0.8), 1.0);
    const auto dh = random_symmetric_field(mesh, 77, 0.4);
    REQUIRE(commutation_error(mesh, d_stiffness(mesh, metric, dh)) == 0.0);
    REQUIRE(commutation_error(mesh, d_mass(mesh, metric, dh)) == 0.0);
}

TEST_CASE("defining identity of the compact-operator derivative") {
    const auto mesh = build_sphere(2);
    const auto metric = background(mesh);
    const auto forms = assemble_forms(mesh, metric, 0.5, 4.0);
    const Eigen::VectorXd u = random_vector(forms.size(), 61);
    Direction dir;
    dir.d_eps = 0.2;
    dir.d_h = random_symmetric_field(mesh, 62, 0.3);
    const Eigen::VectorXd au = forms.apply_compact(u);
    const Eigen::VectorXd dau = dA(forms, metric, dir, u);
    for (unsigned seed : {71u, 72u, 73u}) {
        const Eigen::VectorXd v = random_vector(forms.size(), seed);
        const double lhs = dE(forms, metric, dir, au, v) + forms.energy_product(dau, v);
        const double rhs = dG(forms, metric, dir, u, v);
        const double scale = std::abs(lhs) + std::abs(rhs) + 1.0;
        REQUIRE(std::abs(lhs - rhs) <= 1e-10 * scale);
    }
}

TEST_CASE("all four derivatives match Richardson finite differences") {
    const auto mesh = build_sphere(2);
    const auto plain = fd_validate(mesh, background(mesh), 0.6, 4.0, 1e-5, 10, 2024);
    INFO("E " << plain.worst_energy << "  G " << plain.worst_mass << "  N " << plain.worst_power
              << "  A " << plain.worst_compact);
    REQUIRE(plain.pass);

    const auto curved = metric_from_perturbation(mesh, ellipsoidal_tensor(mesh, {1.0, 1.1, 1.25}), 1.0);
    const auto bent = fd_validate(mesh, curved, 0.6, 4.0, 1e-5, 10, 4048);
    INFO("E " << bent.worst_energy << "  G " << bent.worst_mass << "  N " << bent.worst_power
              << "  A " << bent.worst_compact);
    REQUIRE(bent.pass);
}
