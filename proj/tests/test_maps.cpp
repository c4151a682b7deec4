#include "doctest.h"

#include "opsys/maps.hpp"
#include "opsys/rng.hpp"
#include "opsys/system.hpp"
#include "opsys/zoo.hpp"

#include <cmath>
#include <complex>
#include <vector>

using namespace opsys;

namespace {

CMatrix unit(int k, int p, int q) {
    CMatrix e = CMatrix::Zero(k, k);
    e(p, q) = 1.0;
    return e;
}

// Sum of e^{kl} (x) e^{kl}: the unnormalized maximally entangled matrix of M_k(M_k).
CMatrix entangled(int k) {
    CMatrix u = CMatrix::Zero(k * k, k * k);
    for (int p = 0; p < k; ++p)
        for (int q = 0; q < k; ++q) u.block(p * k, q * k, k, k) = unit(k, p, q);
    return u;
}

// The flip (p,q) -> (q,p) on C^k (x) C^k.
CMatrix swap_matrix(int k) {
    CMatrix w = CMatrix::Zero(k * k, k * k);
    for (int p = 0; p < k; ++p)
        for (int q = 0; q < k; ++q) w(p * k + q, q * k + p) = 1.0;
    return w;
}

// A random self-adjoint map between the two systems.
SystemMap random_sa_map(const OperatorSystem& dom, const OperatorSystem& cod, Rng& rng) {
    const auto& db = selfadjoint_basis(dom.space);
    const auto& cb = selfadjoint_basis(cod.space);
    Eigen::MatrixXd real_coeff(cb.size(), db.size());
    for (int j = 0; j < static_cast<int>(db.size()); ++j)
        for (int i = 0; i < static_cast<int>(cb.size()); ++i) real_coeff(i, j) = rng.gaussian();
    return map_from_action(dom, cod, [&](const CMatrix& x) {
        CMatrix out = CMatrix::Zero(cod.ambient_dim, cod.ambient_dim);
        // Coefficients of x against the self-adjoint basis (complexified).
        for (int j = 0; j < static_cast<int>(db.size()); ++j) {
            const Complex c = hs_inner(x, db[j]);
            for (int i = 0; i < static_cast<int>(cb.size()); ++i)
                out += real_coeff(i, j) * c * cb[i];
        }
        return out;
    });
}

FiniteMetricSpace three_points() {
    std::vector<Eigen::VectorXd> pts(3, Eigen::VectorXd(1));
    pts[0] << 0.0;
    pts[1] << 1.0;
    pts[2] << 2.5;
    return metric_from_points(pts);
}

}  // namespace

TEST_CASE("map construction, application, and linearity") {
    const OperatorSystem band = band_system(3, 1);
    const OperatorSystem full3 = full_system(3);

    const SystemMap inc = map_from_action(band, full3, [](const CMatrix& x) { return x; });
    const SystemMap id = identity_map(band);

    Rng rng(11);
    CMatrix a = band.space.project(rng.hermitian(3));
    CMatrix b = band.space.project(rng.complex_matrix(3, 3));
    CHECK((map_apply(inc, a) - a).norm() <= 1e-12);
    CHECK((map_apply(id, b) - b).norm() <= 1e-12);
    const Complex c(0.3, -1.2);
    CHECK((map_apply(inc, a + c * b) - (a + c * b)).norm() <= 1e-10);

    // e^{1,3} is outside the bandwidth-one system.
    CHECK_THROWS_AS(map_apply(inc, unit(3, 0, 2)), DomainMismatch);
    // An action leaving the codomain is rejected at construction time.
    CHECK_THROWS_AS(map_from_action(full3, band, [](const CMatrix& x) { return x; }),
                    DomainMismatch);

    const SystemMap z = zero_map(band, full3);
    CHECK(map_apply(z, a).norm() == 0.0);
    CHECK(map_distance(z, z) == 0.0);

    const SystemMap emb = embed_codomain(inc);
    CHECK(is_matrix_algebra(emb.codomain));
    CHECK((map_apply(emb, b) - b).norm() <= 1e-12);
}

TEST_CASE("transpose amplification produces the block swap") {
    const OperatorSystem full2 = full_system(2);
    const SystemMap t = transpose_map(full2);

    CHECK((map_apply(t, unit(2, 0, 1)) - unit(2, 1, 0)).norm() <= 1e-13);
    CHECK(is_selfadjoint_map(t));

    // The second amplification sends sum e^{kl} (x) e^{kl} to the flip operator.
    const CMatrix u = entangled(2);
    const CMatrix out = amplify_matrix(t, 2, u);
    CHECK((out - swap_matrix(2)).norm() <= 1e-12);

    const LevelElement ue = make_level_element(full2, 2, u);
    const LevelElement oe = amplify(t, ue);
    CHECK(oe.level == 2);
    CHECK((oe.matrix - swap_matrix(2)).norm() <= 1e-12);
}

TEST_CASE("composition, identity, and adjoint algebra") {
    Rng rng(23);
    const OperatorSystem full2 = full_system(2);
    const OperatorSystem band = band_system(3, 1);

    const SystemMap phi = random_sa_map(band, full2, rng);
    const SystemMap psi = random_sa_map(full2, full2, rng);

    CHECK(map_distance(compose(identity_map(full2), phi), phi) <= 1e-12);
    CHECK(map_distance(compose(phi, identity_map(band)), phi) <= 1e-12);

    const SystemMap chain = compose(psi, phi);
    CMatrix x = band.space.project(rng.complex_matrix(3, 3));
    CHECK((map_apply(chain, x) - map_apply(psi, map_apply(phi, x))).norm() <= 1e-10);

    // Pointwise: the adjoint map is x -> phi(x*)*.
    const SystemMap phis = adjoint_map(phi);
    CHECK((map_apply(phis, x) - map_apply(phi, x.adjoint().eval()).adjoint()).norm() <= 1e-10);
    CHECK(map_distance(adjoint_map(phis), phi) <= 1e-12);
    CHECK(is_selfadjoint_map(phi));  // built from a real coefficient matrix

    // Amplification is functorial.
    const CMatrix w = rng.complex_matrix(6, 6);
    CMatrix wb = CMatrix::Zero(6, 6);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            wb.block(i * 3, j * 3, 3, 3) = band.space.project(w.block(i * 3, j * 3, 3, 3));
    CHECK((amplify_matrix(chain, 2, wb) -
           amplify_matrix(psi, 2, amplify_matrix(phi, 2, wb)))
              .norm() <= 1e-10);
}

TEST_CASE("Choi matrix correspondence round-trips") {
    const OperatorSystem full2 = full_system(2);

    const ChoiData cid = choi_of_map(identity_map(full2));
    CHECK((cid.tau - entangled(2)).norm() <= 1e-13);
    CHECK(lambda_max(cid.tau) == doctest::Approx(2.0).epsilon(1e-10));

    const ChoiData ct = choi_of_map(transpose_map(full2));
    CHECK((ct.tau - swap_matrix(2)).norm() <= 1e-13);
    CHECK(lambda_min(ct.tau) == doctest::Approx(-1.0).epsilon(1e-10));

    Rng rng(5);
    for (int rep = 0; rep < 4; ++rep) {
        const int m = rng.uniform_int(1, 3), n = rng.uniform_int(1, 3);
        const CMatrix tau = rng.complex_matrix(m * n, m * n);
        const ChoiData cd = choi_from_matrix(tau, m, n);
        CHECK((choi_of_map(cd.map_form).tau - tau).norm() <= 1e-12);
    }

    CHECK_THROWS_AS(choi_of_map(map_from_action(band_system(3, 1), full2,
                                                [](const CMatrix& x) {
                                                    return x.block(0, 0, 2, 2).eval();
                                                })),
                    DomainMismatch);
}

TEST_CASE("functional-map correspondence round-trips exactly") {
    Rng rng(71);

    // Map -> functional -> map, across domain/codomain sizes.
    for (int k = 1; k <= 3; ++k) {
        for (int n = 1; n <= 3; ++n) {
            const OperatorSystem dom = full_system(k);
            const OperatorSystem cod = full_system(n);
            for (int rep = 0; rep < 2; ++rep) {
                const SystemMap phi = random_sa_map(dom, cod, rng);
                const LevelFunctional f = upsilon(phi);
                CHECK(f.level == n);
                CHECK(map_distance(theta_of_functional(f), phi) <= 1e-12);
            }
        }
    }

    // Subspace domains round-trip as well.
    for (const OperatorSystem& dom : {band_system(3, 1), diagzero_system(2)}) {
        const SystemMap phi = random_sa_map(dom, full_system(2), rng);
        CHECK(map_distance(theta_of_functional(upsilon(phi)), phi) <= 1e-12);
    }

    // Functional -> map -> functional on a subspace system.
    const OperatorSystem band = band_system(3, 1);
    for (int rep = 0; rep < 3; ++rep) {
        LevelFunctional f;
        f.system = band;
        f.level = 2;
        f.rep = random_element(band, 2, rng).matrix;
        const LevelFunctional g = upsilon(theta_of_functional(f));
        CHECK((g.rep - f.rep).norm() <= 1e-12);
    }

    // The functional of the identity map evaluates the entangled sum to k^2.
    const OperatorSystem full2 = full_system(2);
    const LevelFunctional fid = upsilon(identity_map(full2));
    CHECK(eval(fid, entangled(2)).real() == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(std::abs(eval(fid, entangled(2)).imag()) <= 1e-12);

    // Vector identity: the functional is u -> v* phi^(n)(u) v with v = sum e_j (x) e_j.
    const SystemMap phi = random_sa_map(full2, full2, rng);
    const LevelFunctional f = upsilon(phi);
    const LevelElement u = random_sa_element(full2, 2, rng);
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(4);
    v(0) = 1.0;  // e_1 (x) e_1
    v(3) = 1.0;  // e_2 (x) e_2
    const Complex direct = v.dot(amplify_matrix(phi, 2, u.matrix) * v);
    CHECK(std::abs(eval(f, u.matrix) - direct) <= 1e-10);

    CHECK(is_selfadjoint_functional(f));
    CHECK(functional_rep_deviation(f) <= 1e-12);
}

TEST_CASE("complete positivity detection matches the Choi spectrum") {
    const OperatorSystem full2 = full_system(2);
    Rng rng(301);

    const CpReport rid = is_completely_positive(identity_map(full2));
    CHECK(rid.cp);
    CHECK(rid.min_value >= -1e-9);

    // Conjugation by a fixed matrix is completely positive.
    const CMatrix v = rng.complex_matrix(2, 3);
    const SystemMap conj_map = map_from_action(full2, full_system(3), [&](const CMatrix& x) {
        return (v.adjoint() * x * v).eval();
    });
    CHECK(is_completely_positive(conj_map).cp);

    // The transpose is positive but not completely positive; the witness is a
    // trace-one cone element with a strictly negative functional value.
    const CpReport rt = is_completely_positive(transpose_map(full2));
    CHECK_FALSE(rt.cp);
    CHECK(rt.min_value == doctest::Approx(-1.0).epsilon(1e-6));
    REQUIRE(rt.witness.has_value());
    const CMatrix w = *rt.witness;
    CHECK(std::abs(w.trace() - Complex(1.0)) <= 1e-7);
    CHECK(lambda_min(w) >= -1e-8);
    CHECK(std::abs(eval(upsilon(transpose_map(full2)), w) - Complex(rt.min_value)) <= 1e-6);
    // The minimizer is the rank-one projector onto (e_1 (x) e_2 - e_2 (x) e_1).
    Eigen::VectorXcd singlet = Eigen::VectorXcd::Zero(4);
    singlet(1) = 1.0 / std::sqrt(2.0);
    singlet(2) = -1.0 / std::sqrt(2.0);
    CHECK(std::abs(singlet.dot(w * singlet) - Complex(1.0)) <= 1e-5);

    // On full matrix algebra domains the reported minimum is the smallest Choi
    // eigenvalue.
    for (int rep = 0; rep < 5; ++rep) {
        const SystemMap phi = random_sa_map(full2, full_system(rng.uniform_int(1, 2)), rng);
        const CpReport r = is_completely_positive(phi);
        const double ev = lambda_min(choi_of_map(phi).tau);
        CHECK(r.min_value == doctest::Approx(ev).epsilon(2e-6));
        CHECK(r.cp == (ev >= -1e-8));
    }

    // A map that is not self-adjoint is rejected with the defect recorded.
    const SystemMap skew = map_from_action(full2, full2, [](const CMatrix& x) {
        return (Complex(0, 1) * x).eval();
    });
    const CpReport rs = is_completely_positive(skew);
    CHECK_FALSE(rs.cp);
    CHECK(rs.adjoint_defect > 1e-6);
    CHECK(rs.witness.has_value());

    // Systems with a zero cone make every self-adjoint map vacuously
    // completely positive.
    const SystemMap dz = random_sa_map(diagzero_system(2), full2, rng);
    const CpReport rdz = is_completely_positive(dz);
    CHECK(rdz.cp);
    CHECK(rdz.trivial_cone);
}

TEST_CASE("completely bounded norm on reference maps") {
    Rng rng(47);

    for (int k = 1; k <= 3; ++k)
        CHECK(cb_norm(identity_map(full_system(k))) == doctest::Approx(1.0).epsilon(2e-5));

    CHECK(cb_norm(transpose_map(full_system(2))) == doctest::Approx(2.0).epsilon(1e-4));

    CHECK(cb_norm(zero_map(full_system(2), full_system(2))) == 0.0);

    // Scalar functionals: the norm equals the trace norm of the representer.
    for (int k = 2; k <= 3; ++k) {
        const CMatrix rho = rng.hermitian(k);
        const OperatorSystem dom = full_system(k);
        const SystemMap f = map_from_action(dom, full_system(1), [&](const CMatrix& x) {
            CMatrix out(1, 1);
            out(0, 0) = hs_inner(x, rho);
            return out;
        });
        CHECK(cb_norm(f) == doctest::Approx(trace_norm(rho)).epsilon(1e-4));
    }

    // Completely positive maps attain the norm at the identity.
    for (int rep = 0; rep < 2; ++rep) {
        const CMatrix v1 = rng.complex_matrix(2, 2), v2 = rng.complex_matrix(2, 2);
        const SystemMap phi =
            map_from_action(full_system(2), full_system(2), [&](const CMatrix& x) {
                return (v1.adjoint() * x * v1 + v2.adjoint() * x * v2).eval();
            });
        const double expect = op_norm(map_apply(phi, CMatrix::Identity(2, 2)));
        CHECK(cb_norm(phi) == doctest::Approx(expect).epsilon(1e-4));
    }

    // The inclusion of a subspace system is a complete isometry.
    const OperatorSystem band = band_system(3, 1);
    const SystemMap inc =
        map_from_action(band, full_system(3), [](const CMatrix& x) { return x; });
    CHECK(cb_norm(inc) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("factorization gauge: exactness, identity value, and sandwich") {
    Rng rng(83);
    const OperatorSystem full2 = full_system(2);

    // At level one the gauge is the operator norm.
    for (int rep = 0; rep < 4; ++rep) {
        const LevelElement x = random_sa_element(full2, 1, rng);
        CHECK(gamma_norm(full2, x) == doctest::Approx(op_norm(x.matrix)).epsilon(1e-6));
    }

    // The identity at level n has gauge n.
    for (int n = 1; n <= 3; ++n) {
        const LevelElement in =
            make_level_element(full2, n, CMatrix::Identity(2 * n, 2 * n));
        CHECK(gamma_norm(full2, in) == doctest::Approx(double(n)).epsilon(1e-6));
    }

    // Norm sandwich at level two and three.
    for (int rep = 0; rep < 4; ++rep) {
        const int n = 2 + rep % 2;
        const LevelElement x = random_sa_element(full2, n, rng);
        const double g = gamma_norm(full2, x);
        const double nx = op_norm(x.matrix);
        CHECK(g >= nx - 1e-6);
        CHECK(g <= n * nx + 1e-6);
    }

    // Tensors I_n (x) v with v positive and rank one attain the upper bound.
    {
        Eigen::VectorXcd vec = Eigen::VectorXcd::Zero(2);
        vec(0) = 1.0;
        const CMatrix v = vec * vec.adjoint();
        const LevelElement x =
            make_level_element(full2, 3, kron(CMatrix::Identity(3, 3), v));
        CHECK(gamma_norm(full2, x) == doctest::Approx(3.0 * op_norm(v)).epsilon(1e-6));
    }

    CHECK_THROWS_AS(gamma_norm(full2, make_level_element(full2, 1, unit(2, 0, 1))),
                    NonHermitianInput);

    // Subspace systems go through the same program.
    const OperatorSystem band = band_system(3, 1);
    const LevelElement xb = random_sa_element(band, 2, rng);
    const double gb = gamma_norm(band, xb);
    CHECK(gb >= op_norm(xb.matrix) - 1e-6);
    CHECK(gb <= 2.0 * op_norm(xb.matrix) + 1e-6);
}

TEST_CASE("gauge dual norm matches the norm of the associated map") {
    Rng rng(59);
    for (const int k : {2, 3}) {
        const OperatorSystem s = full_system(k);
        for (int rep = 0; rep < 2; ++rep) {
            LevelFunctional f;
            f.system = s;
            f.level = 2;
            f.rep = random_sa_element(s, 2, rng).matrix;
            const double dual = gamma_dual_norm(f);
            const double cb = cb_norm(theta_of_functional(f));
            CHECK(dual == doctest::Approx(cb).epsilon(1e-4));
        }
    }
    // Subspace domain.
    const OperatorSystem band = band_system(3, 1);
    LevelFunctional f;
    f.system = band;
    f.level = 2;
    f.rep = random_sa_element(band, 2, rng).matrix;
    CHECK(gamma_dual_norm(f) == doctest::Approx(cb_norm(theta_of_functional(f))).epsilon(1e-4));
}

TEST_CASE("restricted norm agrees with the operator norm on reference systems") {
    Rng rng(97);

    const OperatorSystem full3 = full_system(3);
    for (int level = 1; level <= 2; ++level) {
        for (int rep = 0; rep < 3; ++rep) {
            const LevelElement x = random_element(full3, level, rng);
            CHECK(norm_r(full3, x) == doctest::Approx(op_norm(x.matrix)).epsilon(1e-6));
        }
    }

    const OperatorSystem band = band_system(4, 1);
    for (int level = 1; level <= 2; ++level) {
        for (int rep = 0; rep < 2; ++rep) {
            const LevelElement x = random_sa_element(band, level, rng);
            CHECK(norm_r(band, x) == doctest::Approx(op_norm(x.matrix)).epsilon(1e-6));
        }
    }

    // Zero-diagonal system: the cone is {0}, yet the norm is still recovered.
    const OperatorSystem dz = diagzero_system(2);
    const LevelElement e12 = make_level_element(dz, 1, unit(2, 0, 1));
    CHECK(norm_r(dz, e12) == doctest::Approx(1.0).epsilon(1e-6));
    for (int rep = 0; rep < 2; ++rep) {
        const LevelElement x = random_element(dz, 2, rng);
        CHECK(norm_r(dz, x) == doctest::Approx(op_norm(x.matrix)).epsilon(1e-6));
    }

    // Tolerance-relation system from a three-point metric space.
    const OperatorSystem tol = tolerance_system(three_points(), 1.5);
    for (int rep = 0; rep < 3; ++rep) {
        const LevelElement x = random_sa_element(tol, rep == 2 ? 2 : 1, rng);
        CHECK(norm_r(tol, x) == doctest::Approx(op_norm(x.matrix)).epsilon(1e-6));
    }

    CHECK(norm_r(full3, make_level_element(full3, 1, CMatrix::Zero(3, 3))) == 0.0);
}

TEST_CASE("cone separation produces certified functionals") {
    const OperatorSystem full2 = full_system(2);

    // Separating -I from the positives: the optimal state is I/2 at margin 1.
    const LevelElement neg =
        make_level_element(full2, 1, -CMatrix::Identity(2, 2));
    const SeparationReport r1 = separate_from_cone(full2, neg);
    CHECK(r1.delta == doctest::Approx(1.0).epsilon(1e-6));
    CHECK((r1.sigma - 0.5 * CMatrix::Identity(2, 2)).norm() <= 1e-5);
    CHECK(std::abs(eval(r1.functional, neg.matrix) + r1.delta) <= 1e-6);
    CHECK(functional_rep_deviation(r1.functional) <= 1e-9);
    CHECK(is_selfadjoint_functional(r1.functional));

    // A matrix with one small negative eigenvalue: the state concentrates there.
    CMatrix d = CMatrix::Zero(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = -0.1;
    const SeparationReport r2 = separate_from_cone(full2, make_level_element(full2, 1, d));
    CHECK(r2.delta == doctest::Approx(0.1).epsilon(1e-5));
    CHECK(std::abs(r2.sigma(1, 1) - Complex(1.0)) <= 1e-5);

    // Zero-diagonal system: every nonzero self-adjoint element is outside the cone.
    const OperatorSystem dz = diagzero_system(2);
    const LevelElement x = make_level_element(dz, 1, unit(2, 0, 1) + unit(2, 1, 0));
    const SeparationReport r3 = separate_from_cone(dz, x);
    CHECK(r3.delta == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(eval(r3.functional, x.matrix).real() <= -1.0 + 1e-6);

    // Cone members are refused.
    CHECK_THROWS_AS(
        separate_from_cone(full2, make_level_element(full2, 1, CMatrix::Identity(2, 2))),
        SeparationFailed);
    // Non-self-adjoint input is refused.
    CHECK_THROWS_AS(separate_from_cone(full2, make_level_element(full2, 1, unit(2, 0, 1))),
                    NonHermitianInput);
}

TEST_CASE("sampled separation finds certified functionals") {
    const OperatorSystem full2 = full_system(2);

    // Matrix cone samples vs. -I: a strictly separating map must exist.
    {
        const MatrixConvexSet cone = sampled_matrix_cone(full2, 2, 25, 2026);
        const LevelElement v0 =
            make_level_element(full2, 1, -CMatrix::Identity(2, 2));
        const auto psi = effros_winkler_separate(cone, v0);
        REQUIRE(psi.has_value());
        // Certified: at most one on the stored samples, strictly above one at v0.
        const CMatrix at_v0 = map_apply(*psi, v0.matrix, 1e-6);
        CHECK(lambda_max(0.5 * (at_v0 + at_v0.adjoint())) > 1.0);
        for (int m = 1; m <= 2; ++m) {
            for (const CMatrix& w : cone.samples[m - 1]) {
                const CMatrix img = amplify_matrix(*psi, m, w);
                CHECK(lambda_max(0.5 * (img + img.adjoint())) <= 1.0 + 1e-6);
            }
        }
    }

    // Unit-ball samples vs. a point far outside.
    {
        const MatrixConvexSet balls = sampled_unit_balls(full2, 2, 25, 2027);
        const LevelElement v0 =
            make_level_element(full2, 1, 2.0 * CMatrix::Identity(2, 2));
        const auto psi = effros_winkler_separate(balls, v0);
        REQUIRE(psi.has_value());
        const CMatrix at_v0 = map_apply(*psi, v0.matrix, 1e-6);
        CHECK(lambda_max(0.5 * (at_v0 + at_v0.adjoint())) > 1.0);
    }

    // A point well inside the sampled balls cannot be separated.
    {
        const MatrixConvexSet balls = sampled_unit_balls(full2, 2, 25, 2028);
        const LevelElement v0 =
            make_level_element(full2, 1, 0.5 * CMatrix::Identity(2, 2));
        CHECK_FALSE(effros_winkler_separate(balls, v0).has_value());
    }
}
