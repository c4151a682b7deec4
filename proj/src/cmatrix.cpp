#include "opsys/cmatrix.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace opsys {

Complex hs_inner(const CMatrix& a, const CMatrix& b) {
    return (b.adjoint() * a).trace();
}

double hs_norm(const CMatrix& a) { return a.norm(); }

bool is_hermitian(const CMatrix& a, double tol) {
    if (a.rows() != a.cols()) return false;
    double scale = std::max(1.0, a.norm());
    return (a - a.adjoint()).norm() <= tol * scale;
}

CMatrix hermitian_part(const CMatrix& a) { return 0.5 * (a + a.adjoint()); }

EigResult hermitian_eig(const CMatrix& a, double herm_tol) {
    if (a.rows() != a.cols()) throw DimensionMismatch("hermitian_eig: matrix not square");
    if (!is_hermitian(a, herm_tol)) throw NonHermitianInput("hermitian_eig: input not Hermitian");
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian_part(a));
    if (solver.info() != Eigen::Success)
        throw ConvergenceFailure("hermitian_eig: eigensolver failed");
    return EigResult{solver.eigenvalues(), solver.eigenvectors()};
}

double op_norm(const CMatrix& a) {
    if (a.size() == 0) return 0.0;
    // Largest singular value via the Hermitian dilation spectrum.
    CMatrix h(a.rows() + a.cols(), a.rows() + a.cols());
    h.setZero();
    h.topRightCorner(a.rows(), a.cols()) = a;
    h.bottomLeftCorner(a.cols(), a.rows()) = a.adjoint();
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(h);
    if (solver.info() != Eigen::Success) throw ConvergenceFailure("op_norm: eigensolver failed");
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

double trace_norm(const CMatrix& a) {
    if (a.size() == 0) return 0.0;
    Eigen::JacobiSVD<CMatrix> svd(a);
    return svd.singularValues().sum();
}

double lambda_min(const CMatrix& a) { return hermitian_eig(a).values.minCoeff(); }
double lambda_max(const CMatrix& a) { return hermitian_eig(a).values.maxCoeff(); }

bool is_psd(const CMatrix& a, double tol) {
    if (!is_hermitian(a, std::max(tol, 1e-12))) return false;
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian_part(a));
    return solver.eigenvalues().minCoeff() >= -tol;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

CMatrix psd_sqrt(const CMatrix& a) {
    EigResult e = hermitian_eig(a);
    RVector clipped = e.values.cwiseMax(0.0).cwiseSqrt();
    return e.vectors * clipped.asDiagonal() * e.vectors.adjoint();
}

CMatrix psd_inv_sqrt(const CMatrix& a, double pinv_tol) {
    EigResult e = hermitian_eig(a);
    double scale = std::max(e.values.cwiseAbs().maxCoeff(), 1.0);
    RVector inv(e.values.size());
    for (Eigen::Index i = 0; i < e.values.size(); ++i)
        inv(i) = e.values(i) > pinv_tol * scale ? 1.0 / std::sqrt(e.values(i)) : 0.0;
    return e.vectors * inv.asDiagonal() * e.vectors.adjoint();
}

CMatrix ptrace_first(const CMatrix& a, int m, int n) {
    if (a.rows() != Eigen::Index(m) * n || a.cols() != Eigen::Index(m) * n)
        throw DimensionMismatch("ptrace_first: size mismatch");
    CMatrix out = CMatrix::Zero(n, n);
    for (int i = 0; i < m; ++i) out += a.block(i * n, i * n, n, n);
    return out;
}

CMatrix ptrace_second(const CMatrix& a, int m, int n) {
    if (a.rows() != Eigen::Index(m) * n || a.cols() != Eigen::Index(m) * n)
        throw DimensionMismatch("ptrace_second: size mismatch");
    CMatrix out = CMatrix::Zero(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) out(i, j) = a.block(i * n, j * n, n, n).trace();
    return out;
}

std::vector<CMatrix> orthonormalize_span(const std::vector<CMatrix>& gens, double rel_tol) {
    std::vector<CMatrix> basis;
    double scale = 0.0;
    for (const auto& g : gens) scale = std::max(scale, g.norm());
    if (scale == 0.0) return basis;
    for (const auto& g : gens) {
        CMatrix v = g;
        // Two passes of modified Gram-Schmidt keep orthogonality near machine precision.
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis) v -= hs_inner(v, b) * b;
        double nv = v.norm();
        if (nv > rel_tol * scale) basis.push_back(v / nv);
    }
    return basis;
}

bool HSSubspace::contains(const CMatrix& x, double tol) const {
    double scale = std::max(1.0, x.norm());
    return (x - project(x)).norm() <= tol * scale;
}

CMatrix HSSubspace::project(const CMatrix& x) const {
    CMatrix out = CMatrix::Zero(ambient_dim, ambient_dim);
    for (const auto& b : basis) out += hs_inner(x, b) * b;
    return out;
}

std::vector<Complex> HSSubspace::coefficients(const CMatrix& x) const {
    std::vector<Complex> c(basis.size());
    for (size_t i = 0; i < basis.size(); ++i) c[i] = hs_inner(x, basis[i]);
    return c;
}

CMatrix HSSubspace::from_coefficients(const std::vector<Complex>& c) const {
    if (c.size() != basis.size()) throw DimensionMismatch("from_coefficients: size mismatch");
    CMatrix out = CMatrix::Zero(ambient_dim, ambient_dim);
    for (size_t i = 0; i < basis.size(); ++i) out += c[i] * basis[i];
    return out;
}

HSSubspace subspace_from_spanning(int ambient_dim, const std::vector<CMatrix>& gens,
                                  double rel_tol) {
    for (const auto& g : gens)
        if (g.rows() != ambient_dim || g.cols() != ambient_dim)
            throw DimensionMismatch("subspace_from_spanning: generator size mismatch");
    HSSubspace v;
    v.ambient_dim = ambient_dim;
    v.basis = orthonormalize_span(gens, rel_tol);
    if (v.basis.empty()) throw EmptySpan("subspace_from_spanning: zero span");
    return v;
}

std::vector<CMatrix> selfadjoint_basis(const HSSubspace& v, double rel_tol) {
    std::vector<CMatrix> herm_gens;
    herm_gens.reserve(2 * v.basis.size());
    for (const auto& b : v.basis) {
        herm_gens.push_back(hermitian_part(b));
        herm_gens.push_back(hermitian_part(Complex(0, 1) * b));
    }
    // Real-linear Gram-Schmidt: Hermitian matrices with real HS pairing.
    std::vector<CMatrix> basis;
    double scale = 0.0;
    for (const auto& g : herm_gens) scale = std::max(scale, g.norm());
    if (scale == 0.0) return basis;
    for (const auto& g : herm_gens) {
        CMatrix x = g;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis) x -= hs_inner(x, b).real() * b;
        double nx = x.norm();
        if (nx > rel_tol * scale) basis.push_back(x / nx);
    }
    return basis;
}

std::vector<CMatrix> hermitian_complement_basis(int dim, const std::vector<CMatrix>& gens,
                                                double rel_tol) {
    std::vector<CMatrix> basis;  // of the span of gens, real-orthonormal
    double scale = 1.0;
    for (const auto& g : gens) scale = std::max(scale, g.norm());
    for (const auto& g : gens) {
        CMatrix x = hermitian_part(g);
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis) x -= hs_inner(x, b).real() * b;
        double nx = x.norm();
        if (nx > rel_tol * scale) basis.push_back(x / nx);
    }
    std::vector<CMatrix> out;
    for (const auto& h : full_hermitian_basis(dim)) {
        CMatrix x = h;
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& b : basis) x -= hs_inner(x, b).real() * b;
            for (const auto& b : out) x -= hs_inner(x, b).real() * b;
        }
        double nx = x.norm();
        if (nx > rel_tol) out.push_back(x / nx);
    }
    return out;
}

std::vector<CMatrix> full_hermitian_basis(int dim) {
    std::vector<CMatrix> out;
    out.reserve(static_cast<size_t>(dim) * dim);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < dim; ++i) {
        CMatrix e = CMatrix::Zero(dim, dim);
        e(i, i) = 1.0;
        out.push_back(e);
    }
    for (int i = 0; i < dim; ++i)
        for (int j = i + 1; j < dim; ++j) {
            CMatrix re = CMatrix::Zero(dim, dim);
            re(i, j) = inv_sqrt2;
            re(j, i) = inv_sqrt2;
            out.push_back(re);
            CMatrix im = CMatrix::Zero(dim, dim);
            im(i, j) = Complex(0, inv_sqrt2);
            im(j, i) = Complex(0, -inv_sqrt2);
            out.push_back(im);
        }
    return out;
}

}  // namespace opsys
