#pragma once

#include "opsys/system.hpp"

#include <functional>
#include <optional>

namespace opsys {

// Input lies outside the map's domain, or action leaves the codomain.
struct DomainMismatch : Error {
    using Error::Error;
};
// Operation requires a full matrix algebra as codomain (or domain).
struct CodomainNotMatrixAlgebra : Error {
    using Error::Error;
};
// An exact upper certificate and a sampled lower certificate disagree beyond
// the admissible tolerance; signals a solver or modelling fault.
struct BoundMismatch : Error {
    using Error::Error;
};
// Separation requested for a point indistinguishable from the cone.
struct SeparationFailed : Error {
    using Error::Error;
};

// Whether the system is all of M_k (so matrix-algebra-only operations apply).
inline bool is_matrix_algebra(const OperatorSystem& s) {
    return s.dim() == s.ambient_dim * s.ambient_dim;
}

// A linear map between systems, stored as a coefficient matrix over the
// Hilbert-Schmidt bases of domain and codomain.
struct SystemMap {
    OperatorSystem domain;
    OperatorSystem codomain;
    Eigen::MatrixXcd coeff;  // codomain.dim() x domain.dim()
};

// Build a map from its action on the domain basis. Throws DomainMismatch when
// the action leaves the codomain.
SystemMap map_from_action(const OperatorSystem& domain, const OperatorSystem& codomain,
                          const std::function<CMatrix(const CMatrix&)>& action,
                          double tol = 1e-9);

SystemMap identity_map(const OperatorSystem& s);
SystemMap zero_map(const OperatorSystem& domain, const OperatorSystem& codomain);
// x -> x^T; requires the system to be transpose-closed.
SystemMap transpose_map(const OperatorSystem& s);
// Reinterpret the codomain as the full matrix algebra around it.
SystemMap embed_codomain(const SystemMap& phi);

// Apply to a k x k element of the domain (DomainMismatch if outside).
CMatrix map_apply(const SystemMap& phi, const CMatrix& x, double tol = 1e-8);

// Blockwise application at level n = x.level; the result lives in the
// codomain's matrix level.
LevelElement amplify(const SystemMap& phi, const LevelElement& x);
CMatrix amplify_matrix(const SystemMap& phi, int level, const CMatrix& x);

// psi after phi.
SystemMap compose(const SystemMap& psi, const SystemMap& phi);
// phi^*(x) = phi(x^*)^*.
SystemMap adjoint_map(const SystemMap& phi);
bool is_selfadjoint_map(const SystemMap& phi, double tol = 1e-10);
SystemMap add_maps(const SystemMap& a, const SystemMap& b);
SystemMap scale_map(const SystemMap& phi, Complex c);

// Distance between coefficient matrices (maps must share domain/codomain).
double map_distance(const SystemMap& a, const SystemMap& b);

// The block-matrix / linear-map correspondence tau <-> theta_tau between
// M_m(M_n) and L(M_m, M_n): theta_tau(alpha) = sum_{k,l} alpha_{k,l} tau_{k,l}.
struct ChoiData {
    int m = 0;
    int n = 0;
    CMatrix tau;         // (m n) x (m n), block (k,l) = theta(e^{k,l})
    SystemMap map_form;  // theta_tau : M_m -> M_n
};

ChoiData choi_of_map(const SystemMap& phi);
ChoiData choi_from_matrix(const CMatrix& tau, int m, int n);

// A linear functional on M_n(S), stored by its Hilbert-Schmidt representer
// inside M_n(S): F(u) = Tr(rep^* u). Operations that produce functionals as
// optimizers may attach the positive part sigma (PSD, face-supported) and a
// trace-norm witness rho representing the same functional.
struct LevelFunctional {
    OperatorSystem system;
    int level = 1;
    CMatrix rep;
    std::optional<CMatrix> positive_part;  // sigma
    std::optional<CMatrix> norm_witness;   // rho with Tr(rho u) = F(u) on M_n(S)
};

// Functional with the given representer, blockwise-projected into M_n(S).
LevelFunctional make_functional(const OperatorSystem& s, int level, const CMatrix& rep);

Complex eval(const LevelFunctional& f, const CMatrix& u);
bool is_selfadjoint_functional(const LevelFunctional& f, double tol = 1e-10);
// Largest evaluation disagreement between the representer and the attached
// witness across the basis of M_n(S); 0 when no witness is attached.
double functional_rep_deviation(const LevelFunctional& f);

// The pairing between maps into M_n and functionals on M_n(domain):
// upsilon(phi)(u) = sum_{k,l} phi(u_{k,l})_{k,l}; theta inverts it.
LevelFunctional upsilon(const SystemMap& phi);
SystemMap theta_of_functional(const LevelFunctional& f);

struct CpReport {
    bool cp = false;
    bool trivial_cone = false;   // level cone of the domain is {0}
    double min_value = 0.0;      // min of upsilon over the trace-one cone slice
    double adjoint_defect = 0.0; // nonzero when the map is not self-adjoint
    std::optional<CMatrix> witness;  // cone element with upsilon < 0, or the
                                     // basis element violating self-adjointness
};

// Complete positivity via positivity of upsilon on the level-n cone of the
// domain (n = codomain ambient dimension); one SDP on the cone's face.
CpReport is_completely_positive(const SystemMap& phi, double feas_tol = 1e-8);

// Completely bounded norm of a map into a matrix algebra. Exact SDP over all
// extensions to the ambient algebra, cross-checked against a sampled
// amplification lower bound; BoundMismatch when the certificates disagree by
// more than 1e-4.
double cb_norm(const SystemMap& phi);

// The regularization norm: distance from the self-adjoint dilation of x to
// the negative of the level-2n cone, in operator norm. Equals the supremum of
// F(x-hat) over positive functionals of norm at most one.
double norm_r(const OperatorSystem& s, const LevelElement& x);

// Factorization gauge of a self-adjoint x at level n:
// inf{Tr(B) : -B (X) I <= x <= B (X) I, B >= 0 scalar n x n}, cross-checked
// against its dual description (sup of F(x) over the cb-norm unit ball);
// BoundMismatch on disagreement beyond 1e-4.
double gamma_norm(const OperatorSystem& s, const LevelElement& x);

// Dual norm of a self-adjoint functional F on M_n(X) with respect to the
// gauge: sup{|F(x)| : gamma(x) <= 1}.
double gamma_dual_norm(const LevelFunctional& f);

struct SeparationReport {
    CMatrix sigma;   // PSD, trace one; g = Tr(sigma .) separates
    double delta = 0.0;  // g(v0) = -delta < 0
    LevelFunctional functional;
};

// Positive functional separating a self-adjoint v0 from the level cone;
// SeparationFailed when v0 is within feas_tol of the cone.
SeparationReport separate_from_cone(const OperatorSystem& s, const LevelElement& v0,
                                    double feas_tol = 1e-8);

// A sampled presentation of a matrix convex set: certified members per level.
struct MatrixConvexSet {
    OperatorSystem system;
    int max_level = 1;
    bool cone = false;  // closed under positive scaling
    std::vector<std::vector<CMatrix>> samples;  // samples[m-1] at level m
};

MatrixConvexSet sampled_matrix_cone(const OperatorSystem& s, int max_level, int per_level,
                                    std::uint64_t seed);
MatrixConvexSet sampled_unit_balls(const OperatorSystem& s, int max_level, int per_level,
                                   std::uint64_t seed);

// Best-effort constructive separation of v0 from a matrix convex set: finds a
// scalar separating functional by SDP, dominates its matrix transport by a
// scalar metric G (second SDP), and returns the rescaled map when the
// certificates Re psi^(m)(w) <= I (samples) and psi^(n)(v0) not<= I (exact)
// verify; nullopt otherwise.
std::optional<SystemMap> effros_winkler_separate(const MatrixConvexSet& K,
                                                 const LevelElement& v0);

}  // namespace opsys
