#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "opsys/cmatrix.hpp"
#include "opsys/rng.hpp"
#include "opsys/sdp.hpp"

namespace opsys {

struct NetNotIncreasing : Error {
    using Error::Error;
};
struct NotInSystem : Error {
    using Error::Error;
};

// Maximal-rank positive element and its support projection.
struct FacialData {
    CMatrix u_star;  // in S, PSD, maximal rank among cone elements
    CMatrix P;       // support projection of u_star
    int rank = 0;
};

// A self-adjoint subspace S of M_k. Copies share the lazily filled caches.
class OperatorSystem {
  public:
    int ambient_dim = 0;
    HSSubspace space;              // adjoint-closed
    std::vector<CMatrix> sa_basis; // real-orthonormal basis of S_sa

    int dim() const { return space.dim(); }
    int sa_dim() const { return static_cast<int>(sa_basis.size()); }
    bool contains(const CMatrix& x, double tol = 1e-9) const { return space.contains(x, tol); }
    CMatrix project(const CMatrix& x) const { return space.project(x); }

    struct Cache {
        std::mutex mu;
        std::optional<FacialData> facial;
        bool order_unit_done = false;
        std::optional<CMatrix> order_unit;
        double order_unit_margin = 0.0;
        std::map<int, std::vector<CMatrix>> level_sa;    // sa basis of M_n(S)
        std::map<int, std::vector<CMatrix>> level_pin;   // Hermitian complement of M_n(S)
        std::map<int, std::vector<CMatrix>> cone_span;   // basis of span(M_n(S)_+)
    };
    std::shared_ptr<Cache> cache = std::make_shared<Cache>();
};

inline bool same_system(const OperatorSystem& a, const OperatorSystem& b) {
    return a.cache == b.cache;
}

// Adjoint-close and orthonormalize the span. Throws EmptySpan on no input or
// an all-zero span; DimensionMismatch on ragged input.
OperatorSystem make_system(const std::vector<CMatrix>& spanning);

// An element of M_n(S), stored with its block coefficients over space.basis.
struct LevelElement {
    OperatorSystem system;
    int level = 1;
    CMatrix matrix;                            // (n k) x (n k)
    std::vector<std::vector<Complex>> coeffs;  // [i*n+j] -> coefficients of block (i,j)

    bool is_selfadjoint(double tol = 1e-10) const { return is_hermitian(matrix, tol); }
};

// Validates block membership: every k x k block of m must lie in S within tol.
LevelElement make_level_element(const OperatorSystem& S, int level, const CMatrix& m,
                                double tol = 1e-9);

// Embed into a higher level by zero padding (norm and cone membership are
// preserved; checked by tests, relied on throughout).
LevelElement zero_pad(const LevelElement& x, int new_level);

// Real-orthonormal basis of the self-adjoint part of M_n(S); cached.
const std::vector<CMatrix>& level_sa_basis(const OperatorSystem& S, int level);

// Hermitian basis of the orthogonal complement of M_n(S) inside the Hermitian
// (nk) x (nk) matrices: v in M_n(S)_sa iff <H, v> = 0 for all H here; cached.
const std::vector<CMatrix>& level_pinning_basis(const OperatorSystem& S, int level);

// Real-orthonormal basis of span(M_n(S)_+) = {v in M_n(S)_sa : QvQ = v} with
// Q = I_n (x) P, P the level-1 support projection; cached.
const std::vector<CMatrix>& cone_span_basis(const OperatorSystem& S, int level);

// Random self-adjoint element of M_n(S) with gaussian coefficients.
LevelElement random_sa_element(const OperatorSystem& S, int level, Rng& rng);

// Random (not necessarily self-adjoint) element of M_n(S).
LevelElement random_element(const OperatorSystem& S, int level, Rng& rng);

// Random element of M_n(S)_+ built from the maximal-rank positive element.
LevelElement random_cone_element(const OperatorSystem& S, int level, Rng& rng);

struct ConeResult {
    bool in_cone = false;
    double min_eig = 0.0;
    CMatrix certificate;  // unit-trace PSD rho with Tr(rho x) < 0 when outside
};

// Membership of a self-adjoint x in M_n(S)_+. The subspace constraint is
// structural, so this is an eigenvalue test; the certificate for rejection is
// the normalized projection onto the negative eigenspace.
ConeResult cone_membership(const OperatorSystem& S, const LevelElement& x,
                           double feas_tol = 1e-8);

// Maximal-rank element of S cap PSD and its support projection; support
// maximality is certified by growing iterations, not a single solve. Cached.
const FacialData& max_rank_positive(const OperatorSystem& S);

struct GeneratingReport {
    bool generating = false;
    std::optional<CMatrix> witness;  // sa basis element with PbP != b
};

// The cone of S generates S_sa iff every sa basis element is supported by the
// maximal-rank projection.
GeneratingReport is_generating(const OperatorSystem& S);

// Largest t with tI <= e <= I solvable over e in S_sa; Some(e) iff t > 1e-8,
// in which case e is an Archimedean matrix order unit for S. Cached.
std::optional<LevelElement> find_order_unit(const OperatorSystem& S);

// The optimal t of the order-unit program (0.0 when the search failed or the
// optimum is not positive); forces the search on first use.
double order_unit_margin(const OperatorSystem& S);

struct OrderUnitNet {
    std::vector<CMatrix> elements;  // increasing, each in S cap PSD
};

// Validates each element lies in the cone and consecutive differences do too.
OrderUnitNet make_net(const OperatorSystem& S, const std::vector<CMatrix>& elements,
                      double feas_tol = 1e-8);

// inf over net elements a of inf{t : [[t I(x)a, x],[x*, t I(x)a]] psd}; +inf
// when infeasible for every element. Pure eigenvalue bisection; for invertible
// a the congruence closed form is used and cross-checked against bisection.
double norm_a(const OperatorSystem& S, const OrderUnitNet& net, const LevelElement& x);

// The weak variant: finite nets stabilize, so the value is the one computed
// at the last net element alone.
double norm_a_weak(const OperatorSystem& S, const OrderUnitNet& net, const LevelElement& x);

struct WeakNormReport {
    double max_deviation = 0.0;
    bool verdict = false;
    int samples = 0;
};

// Samples sa elements at levels 1..max_level and compares op_norm with the
// weak net norm; verdict at tolerance 1e-6.
WeakNormReport is_weakly_norm_defining(const OperatorSystem& S, const OrderUnitNet& net,
                                       int samples, int max_level = 2,
                                       std::uint64_t seed = 11);

struct MatrixRegularReport {
    bool sandwich_feasible = false;  // every sampled ||x|| < 1 admits ||u|| <= 1, -u<=x<=u
    bool norm_monotone = false;      // sampled sandwiches satisfy ||x|| <= ||u||(1+1e-8)
    double worst_margin = 0.0;       // most negative feasibility margin seen
    int samples = 0;
};

MatrixRegularReport is_matrix_regular(const OperatorSystem& S, int level, int samples,
                                      std::uint64_t seed = 13);

struct DecompositionReport {
    std::vector<double> rho;  // rho[n-1] estimate for level n; +inf if undecomposable
    bool dualizable = false;  // all finite
};

// rho_n = max over unit-sphere sa samples of min{max(||u||,||v||) : x = u - v,
// u, v in the cone}, each inner problem an SDP.
DecompositionReport decomposition_constants(const OperatorSystem& S, int max_level,
                                            int samples, std::uint64_t seed = 17);

}  // namespace opsys
