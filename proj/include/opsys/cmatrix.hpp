#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace opsys {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct NonHermitianInput : Error {
    using Error::Error;
};
struct EmptySpan : Error {
    using Error::Error;
};
struct LevelMismatch : Error {
    using Error::Error;
};
struct DimensionMismatch : Error {
    using Error::Error;
};
struct ConvergenceFailure : Error {
    using Error::Error;
};
// Malformed textual input (CSV / JSON); line and column are 1-based, 0 = unknown.
struct ParseError : Error {
    int line = 0;
    int column = 0;
    explicit ParseError(const std::string& what, int line_ = 0, int column_ = 0)
        : Error(what), line(line_), column(column_) {}
};

// Frobenius (Hilbert-Schmidt) inner product <A,B> = Tr(B* A).
Complex hs_inner(const CMatrix& a, const CMatrix& b);
double hs_norm(const CMatrix& a);

bool is_hermitian(const CMatrix& a, double tol = 1e-12);
CMatrix hermitian_part(const CMatrix& a);

// Eigenvalues ascending; a must be Hermitian within tol, else NonHermitianInput.
struct EigResult {
    RVector values;   // ascending
    CMatrix vectors;  // columns, unitary
};
EigResult hermitian_eig(const CMatrix& a, double herm_tol = 1e-10);

double op_norm(const CMatrix& a);     // largest singular value
double trace_norm(const CMatrix& a);  // sum of singular values
double lambda_min(const CMatrix& a);
double lambda_max(const CMatrix& a);
bool is_psd(const CMatrix& a, double tol);

CMatrix kron(const CMatrix& a, const CMatrix& b);

// Positive square root / inverse square root of a PSD Hermitian matrix.
CMatrix psd_sqrt(const CMatrix& a);
CMatrix psd_inv_sqrt(const CMatrix& a, double pinv_tol = 1e-12);

// Partial traces on M_m (x) M_n with index (i,j) <-> i*n + j.
CMatrix ptrace_first(const CMatrix& a, int m, int n);   // result in M_n
CMatrix ptrace_second(const CMatrix& a, int m, int n);  // result in M_m

// Orthonormal basis (Hilbert-Schmidt) of the span of the given matrices via
// modified Gram-Schmidt with re-orthogonalization; relative rank cutoff.
std::vector<CMatrix> orthonormalize_span(const std::vector<CMatrix>& gens, double rel_tol = 1e-10);

// A linear subspace of M_k stored by an HS-orthonormal basis.
struct HSSubspace {
    int ambient_dim = 0;
    std::vector<CMatrix> basis;  // HS-orthonormal

    int dim() const { return static_cast<int>(basis.size()); }
    bool contains(const CMatrix& x, double tol = 1e-9) const;
    CMatrix project(const CMatrix& x) const;
    std::vector<Complex> coefficients(const CMatrix& x) const;
    CMatrix from_coefficients(const std::vector<Complex>& c) const;
};

HSSubspace subspace_from_spanning(int ambient_dim, const std::vector<CMatrix>& gens,
                                  double rel_tol = 1e-10);

// Real-orthonormal basis of the self-adjoint part of an adjoint-closed subspace.
std::vector<CMatrix> selfadjoint_basis(const HSSubspace& v, double rel_tol = 1e-10);

// Hermitian basis of the orthogonal complement of span(gens) inside the
// Hermitian matrices of size dim (real HS pairing).
std::vector<CMatrix> hermitian_complement_basis(int dim, const std::vector<CMatrix>& gens,
                                                double rel_tol = 1e-10);

// Hermitian HS-orthonormal basis of all Hermitian dim x dim matrices.
std::vector<CMatrix> full_hermitian_basis(int dim);

}  // namespace opsys
