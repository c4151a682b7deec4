#pragma once

#include <optional>
#include <string>
#include <vector>

#include "opsys/cmatrix.hpp"

namespace opsys {

enum class SdpStatus { Optimal, PrimalInfeasible, DualInfeasible, Indeterminate };

std::string to_string(SdpStatus s);

struct SolveOptions {
    double gap_tol = 1e-8;
    double feas_tol = 1e-8;
    int max_iters = 200;
    double infeas_ratio = 1e6;  // kappa/tau ratio declaring infeasibility
};

// Standard conic form: minimize <C,X> s.t. <A_i,X> = b_i, X block-diagonal PSD.
// Constraint matrices carry optional row/col supports so the Schur complement
// exploits sparsity of subspace-pinning constraints.
struct ConicTerm {
    int block = 0;
    CMatrix mat;  // Hermitian
    std::vector<int> row_support, col_support;
};

struct ConicConstraint {
    std::vector<ConicTerm> terms;
    double rhs = 0.0;
};

struct ConicProgram {
    std::vector<int> block_dims;
    std::vector<CMatrix> objective;  // one Hermitian matrix per block
    std::vector<ConicConstraint> constraints;
};

struct ConicSolution {
    SdpStatus status = SdpStatus::Indeterminate;
    std::vector<CMatrix> X;  // primal blocks (or dual-infeasibility certificate)
    std::vector<double> y;   // multipliers (or primal-infeasibility certificate)
    std::vector<CMatrix> Z;  // dual slacks
    double objective = 0.0;
    double dual_objective = 0.0;
    double gap = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    int iterations = 0;
    std::string message;
};

ConicSolution solve_conic(const ConicProgram& prog, const SolveOptions& opts = {});

void fill_term_support(ConicTerm& term, double tol = 0.0);

// Public LMI form: minimize c.y s.t. F_0 + sum_i y_i F_i psd per block,
// optional equality rows a.y = b eliminated by nullspace parametrization.
struct SdpBlock {
    int dim = 0;
    std::vector<CMatrix> F;  // size m+1: F[0] = F_0, F[i] = coefficient of y_i
};

struct SdpEquality {
    std::vector<double> a;
    double b = 0.0;
};

struct SdpProblem {
    int num_vars = 0;
    std::vector<double> c;
    std::vector<SdpBlock> blocks;
    std::vector<SdpEquality> equalities;
};

struct SdpSolution {
    SdpStatus status = SdpStatus::Indeterminate;
    std::vector<double> y;
    std::vector<CMatrix> Z;  // dual multiplier blocks (Farkas certificate when infeasible)
    double objective = 0.0;
    double dual_objective = 0.0;
    double gap = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    int iterations = 0;
    std::string message;
};

SdpSolution solve_sdp(const SdpProblem& prob, const SolveOptions& opts = {});

// Independent re-verification of a returned solution or certificate.
struct CertificateReport {
    bool ok = false;
    double worst_violation = 0.0;
    std::string detail;
};

CertificateReport check_certificate(const SdpProblem& prob, const SdpSolution& sol,
                                    double tol = 1e-7);

}  // namespace opsys
