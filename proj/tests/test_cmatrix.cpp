#include "doctest.h"
#include "opsys/cmatrix.hpp"
#include "opsys/rng.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

using namespace opsys;

namespace {

// Independent eigenvalue oracle: characteristic polynomial coefficients via
// Faddeev-LeVerrier, then roots as eigenvalues of the companion matrix built
// with plain double arithmetic (no reuse of the Hermitian solver under test).
std::vector<double> charpoly_roots(const CMatrix& a) {
    const int n = static_cast<int>(a.rows());
    std::vector<Complex> coeff(n + 1);
    coeff[0] = 1.0;
    CMatrix M = CMatrix::Zero(n, n);
    for (int k = 1; k <= n; ++k) {
        M = a * M + coeff[k - 1] * CMatrix::Identity(n, n);
        coeff[k] = -(a * M).trace() / static_cast<double>(k);
    }
    Eigen::MatrixXcd comp = Eigen::MatrixXcd::Zero(n, n);
    for (int i = 0; i < n; ++i) comp(i, n - 1) = -coeff[n - i];
    for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(comp);
    std::vector<double> roots(n);
    for (int i = 0; i < n; ++i) roots[i] = es.eigenvalues()(i).real();
    std::sort(roots.begin(), roots.end());
    return roots;
}

}  // namespace

TEST_CASE("hermitian_eig matches characteristic polynomial roots") {
    Rng rng(7001);
    for (int trial = 0; trial < 60; ++trial) {
        int n = rng.uniform_int(1, 6);
        CMatrix a = rng.hermitian(n) * rng.uniform(0.1, 10.0);
        EigResult r = hermitian_eig(a);
        auto roots = charpoly_roots(a);
        double scale = std::max(1.0, a.norm());
        for (int i = 0; i < n; ++i)
            CHECK(std::abs(r.values(i) - roots[i]) < 1e-7 * scale);
    }
}

TEST_CASE("hermitian_eig reconstructs the input across many random draws") {
    Rng rng(7002);
    for (int trial = 0; trial < 1000; ++trial) {
        int n = rng.uniform_int(1, 8);
        CMatrix a = rng.hermitian(n);
        if (trial % 3 == 0) {
            // Clustered spectrum stress: repeat an eigenvalue.
            CMatrix u = rng.unitary(n);
            RVector d(n);
            for (int i = 0; i < n; ++i) d(i) = (i % 2 == 0) ? 1.0 : rng.gaussian();
            a = u * d.cast<Complex>().asDiagonal() * u.adjoint();
            a = hermitian_part(a);
        }
        EigResult r = hermitian_eig(a);
        CMatrix rec = r.vectors * r.values.cast<Complex>().asDiagonal() * r.vectors.adjoint();
        CHECK((rec - a).norm() < 1e-10 * std::max(1.0, a.norm()));
        CMatrix gram = r.vectors.adjoint() * r.vectors;
        CHECK((gram - CMatrix::Identity(n, n)).norm() < 1e-10);
        for (int i = 0; i + 1 < n; ++i) CHECK(r.values(i) <= r.values(i + 1) + 1e-14);
    }
}

TEST_CASE("hermitian_eig rejects non-hermitian input") {
    CMatrix a(2, 2);
    a << Complex(0, 0), Complex(1, 0), Complex(0, 0), Complex(0, 0);
    CHECK_THROWS_AS(hermitian_eig(a), NonHermitianInput);
}

TEST_CASE("operator and trace norms on closed-form examples") {
    CMatrix a(2, 2);
    a << Complex(3, 0), Complex(0, 0), Complex(0, 0), Complex(-4, 0);
    CHECK(op_norm(a) == doctest::Approx(4.0));
    CHECK(trace_norm(a) == doctest::Approx(7.0));

    // Nilpotent rank-one block: both norms equal the singular value.
    CMatrix n2 = CMatrix::Zero(2, 2);
    n2(0, 1) = Complex(0, 2);
    CHECK(op_norm(n2) == doctest::Approx(2.0));
    CHECK(trace_norm(n2) == doctest::Approx(2.0));

    Rng rng(7003);
    for (int t = 0; t < 50; ++t) {
        CMatrix g = rng.complex_matrix(4, 4);
        Eigen::JacobiSVD<CMatrix> svd(g);
        CHECK(op_norm(g) == doctest::Approx(svd.singularValues()(0)).epsilon(1e-9));
        CHECK(trace_norm(g) == doctest::Approx(svd.singularValues().sum()).epsilon(1e-9));
    }
}

TEST_CASE("kron agrees with entry formula and mixed-product rule") {
    Rng rng(7004);
    CMatrix a = rng.complex_matrix(3, 2), b = rng.complex_matrix(2, 4);
    CMatrix c = rng.complex_matrix(2, 3), d = rng.complex_matrix(4, 2);
    CMatrix lhs = kron(a, b) * kron(c, d);
    CMatrix rhs = kron(a * c, b * d);
    CHECK((lhs - rhs).norm() < 1e-12 * std::max(1.0, rhs.norm()));
    CMatrix k = kron(a, b);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j)
            for (int p = 0; p < 2; ++p)
                for (int q = 0; q < 4; ++q)
                    CHECK(std::abs(k(i * 2 + p, j * 4 + q) - a(i, j) * b(p, q)) < 1e-14);
}

TEST_CASE("partial traces invert kron with the right normalization") {
    Rng rng(7005);
    CMatrix a = rng.hermitian(3), b = rng.hermitian(2);
    CMatrix t = kron(a, b);
    CMatrix tf = ptrace_first(t, 3, 2);   // trace out the M_3 factor
    CMatrix ts = ptrace_second(t, 3, 2);  // trace out the M_2 factor
    CHECK((tf - a.trace() * b).norm() < 1e-12);
    CHECK((ts - b.trace() * a).norm() < 1e-12);
    CHECK(std::abs(tf.trace() - t.trace()) < 1e-12);
}

TEST_CASE("psd_sqrt and psd_inv_sqrt invert each other on the range") {
    Rng rng(7006);
    CMatrix p = rng.psd(4) + 0.1 * CMatrix::Identity(4, 4);
    CMatrix s = psd_sqrt(p);
    CHECK((s * s - p).norm() < 1e-10 * p.norm());
    CMatrix si = psd_inv_sqrt(p);
    CHECK((s * si - CMatrix::Identity(4, 4)).norm() < 1e-8);
}

TEST_CASE("subspace projection is idempotent self-adjoint and rank-correct") {
    Rng rng(7007);
    std::vector<CMatrix> gens;
    CMatrix g1 = rng.complex_matrix(3, 3);
    CMatrix g2 = rng.complex_matrix(3, 3);
    gens.push_back(g1);
    gens.push_back(g2);
    gens.push_back(g1 + Complex(0, 2) * g2);  // dependent
    HSSubspace sub = subspace_from_spanning(3, gens);
    CHECK(sub.dim() == 2);
    CHECK(sub.contains(g1));
    CHECK(sub.contains(g2 * Complex(0.3, -1.0)));
    CMatrix x = rng.complex_matrix(3, 3);
    CMatrix px = sub.project(x);
    CHECK((sub.project(px) - px).norm() < 1e-10);
    // Projection residual is orthogonal to every generator.
    CHECK(std::abs(hs_inner(g1, x - px)) < 1e-10);
    CHECK(std::abs(hs_inner(g2, x - px)) < 1e-10);
    auto co = sub.coefficients(px);
    CHECK((sub.from_coefficients(co) - px).norm() < 1e-10);
}

TEST_CASE("selfadjoint_basis spans the hermitian parts and is orthonormal") {
    Rng rng(7008);
    std::vector<CMatrix> gens = {rng.complex_matrix(3, 3), rng.complex_matrix(3, 3)};
    std::vector<CMatrix> closed = gens;
    for (const auto& g : gens) closed.push_back(g.adjoint());
    HSSubspace sub = subspace_from_spanning(3, closed);
    auto basis = selfadjoint_basis(sub);
    for (const auto& b : basis) {
        CHECK(is_hermitian(b));
        CHECK(hs_norm(b) == doctest::Approx(1.0).epsilon(1e-9));
    }
    for (size_t i = 0; i < basis.size(); ++i)
        for (size_t j = i + 1; j < basis.size(); ++j)
            CHECK(std::abs(hs_inner(basis[i], basis[j])) < 1e-10);
    // Real span must contain h and k parts of every generator.
    for (const auto& g : gens) {
        for (CMatrix target : {hermitian_part(g), hermitian_part(Complex(0, 1) * g)}) {
            CMatrix residual = target;
            for (const auto& b : basis) residual -= hs_inner(b, target).real() * b;
            CHECK(residual.norm() < 1e-9 * std::max(1.0, target.norm()));
        }
    }
}

TEST_CASE("full_hermitian_basis has dimension d^2 and complement logic works") {
    auto full = full_hermitian_basis(3);
    CHECK(full.size() == 9);
    std::vector<CMatrix> gens = {CMatrix::Identity(3, 3)};
    auto comp = hermitian_complement_basis(3, gens);
    CHECK(comp.size() == 8);
    for (const auto& c : comp) {
        CHECK(is_hermitian(c));
        CHECK(std::abs(hs_inner(CMatrix::Identity(3, 3), c)) < 1e-10);
    }
}

TEST_CASE("rng unitary is unitary and isometry preserves norms") {
    Rng rng(7009);
    CMatrix u = rng.unitary(5);
    CHECK((u.adjoint() * u - CMatrix::Identity(5, 5)).norm() < 1e-12);
    CMatrix v = rng.isometry(5, 2);
    CHECK((v.adjoint() * v - CMatrix::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("rng is deterministic for a fixed seed") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(43);
    CHECK(Rng(42).next_u64() != c.next_u64());
}
