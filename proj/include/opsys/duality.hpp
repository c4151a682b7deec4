#pragma once

#include "opsys/maps.hpp"
#include "opsys/system.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace opsys {

struct NotCCP : Error {
    using Error::Error;
};
struct NotGenerating : Error {
    using Error::Error;
};

// The dual of an operator system: the functional space carrying the dual
// matrix cones (membership = complete positivity of the associated map) and
// the dual norm computed by an exact semidefinite program.  The dual is
// degenerate when the norm oracle vanishes on some nonzero functional; that
// happens exactly when the off-diagonal corners of level-two cone elements
// fail to span the system.
struct DualSystem {
    OperatorSystem base;
    std::vector<CMatrix> dual_basis;  // representers of the coordinate functionals
    bool degenerate = false;
    bool generating = false;     // the base cone spans the self-adjoint part
    bool iota_verified = false;  // embedding spot-checks performed at construction
    std::function<bool(const LevelFunctional&)> cone_oracle;
    std::function<double(const LevelFunctional&)> norm_oracle;
};

DualSystem dual_system(const OperatorSystem& s);

// Membership of f in the dual matrix cone at its own level.
bool dual_cone_member(const DualSystem& d, const LevelFunctional& f, double feas_tol = 1e-8);

// The dual-system norm of a level-n functional f:
//   sup{ <f-hat, w> : w in M_2n(S)_+, w <= B (x) I_k, Tr B <= 1 },
// where f-hat is the self-adjoint dilation of the representer.  The gauge
// ball {w >= 0, w <= B (x) I, Tr B <= 1} is the positive part of the unit
// ball of the pairing, so this single program evaluates the norm exactly.
double dual_norm(const DualSystem& d, const LevelFunctional& f);

// Comparison of the two natural norms on a functional: the completely
// bounded norm of its matrix form and the dual-system norm.
struct DualNormReport {
    int level = 1;
    CMatrix f;  // representer
    double cb_value = 0.0;
    double r_value = 0.0;
    double ratio = 1.0;           // cb_value / max(r_value, 1e-12)
    bool not_dualizable = false;  // the dual norm vanishes on a nonzero functional
};

DualNormReport iota_compare(const DualSystem& d, const LevelFunctional& f);

// The dual of a completely contractive completely positive map phi: S -> T
// sends a functional g on T to g o phi on S.
struct DualMap {
    DualSystem domain_dual;    // dual of the codomain of the original map
    DualSystem codomain_dual;  // dual of the domain of the original map
    Eigen::MatrixXcd coeff;    // adjoint of the original coefficient matrix
};

LevelFunctional map_functional(const DualMap& dm, const LevelFunctional& g);

struct FunctorReport {
    bool cone_preserved = false;      // dual-cone samples map into the dual cone
    double max_cone_defect = 0.0;     // worst violation seen in the cone check
    bool norm_contractive = false;    // dual norm does not increase
    double max_norm_excess = 0.0;     // worst norm increase seen
    double contravariance_defect = 0.0;  // (psi o phi)^dual vs phi^dual o psi^dual
    bool identity_law = false;        // the dual of the identity is the identity
    bool pass = false;
};

struct DualFunctorResult {
    DualMap dual_map;
    FunctorReport report;
};

// Throws NotCCP unless phi is completely positive with cb norm <= 1 + 1e-8.
DualFunctorResult functor_dual_map(const SystemMap& phi, int samples = 4,
                                   std::uint64_t seed = 2);

// One verdict row of a verification report.
struct CheckRow {
    std::string check;
    double value = 0.0;
    double bound = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct DoubleDualConfig {
    int levels = 2;
    int samples_per_level = 4;
    std::uint64_t seed = 1;
    double tol = 1e-5;
    bool cross_check_restricted_norm = true;  // compare against the cone-distance norm
};

// Comparison of S with its double dual under the canonical pairing: cone
// correspondence, norm equality on positive elements, and the full isometry
// verdict (asserted when an order unit exists).
struct DoubleDualReport {
    bool generating = false;
    bool has_order_unit = false;
    std::vector<CheckRow> rows;
    int cone_mismatches = 0;
    double max_positive_norm_dev = 0.0;
    double max_general_norm_dev = 0.0;
    double max_restricted_cross_dev = 0.0;
    bool cone_ok = false;
    bool positive_norm_ok = false;
    bool isometry_ok = false;
    bool pass = false;
};

DoubleDualReport double_dual_compare(const OperatorSystem& s, const DoubleDualConfig& cfg = {});

struct TheoremSuiteConfig {
    int levels = 2;
    int samples = 8;
    std::uint64_t seed = 3;
};

// Consistency suite tying together the equivalent characterizations:
// generating cone vs. finite decomposition constants, cone-span density vs.
// injectivity of the embedding into the dual, and dualizability vs. bounded
// norm ratios.
struct TheoremSuiteReport {
    std::vector<CheckRow> rows;
    bool all_consistent = false;
};

TheoremSuiteReport verify_theorem_suite(const OperatorSystem& s,
                                        const TheoremSuiteConfig& cfg = {});

}  // namespace opsys
