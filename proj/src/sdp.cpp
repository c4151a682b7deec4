#include "opsys/sdp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>

namespace opsys {

std::string to_string(SdpStatus s) {
    switch (s) {
        case SdpStatus::Optimal: return "Optimal";
        case SdpStatus::PrimalInfeasible: return "PrimalInfeasible";
        case SdpStatus::DualInfeasible: return "DualInfeasible";
        default: return "Indeterminate";
    }
}

void fill_term_support(ConicTerm& term, double tol) {
    term.row_support.clear();
    term.col_support.clear();
    const auto& m = term.mat;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        bool nz = false;
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (std::abs(m(i, j)) > tol) {
                nz = true;
                break;
            }
        if (nz) term.row_support.push_back(static_cast<int>(i));
    }
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        bool nz = false;
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (std::abs(m(i, j)) > tol) {
                nz = true;
                break;
            }
        if (nz) term.col_support.push_back(static_cast<int>(j));
    }
}

namespace {

double real_inner(const CMatrix& a, const CMatrix& b) {
    return (a.array().conjugate() * b.array()).sum().real();
}

// <A, T> restricted to A's support rows/cols.
double supported_inner(const ConicTerm& t, const CMatrix& big) {
    if (t.row_support.empty() || t.col_support.empty()) return real_inner(t.mat, big);
    double acc = 0.0;
    for (int r : t.row_support)
        for (int c : t.col_support) acc += (std::conj(t.mat(r, c)) * big(r, c)).real();
    return acc;
}

// T = X * A * Zi exploiting A's column support.
CMatrix scaled_product(const CMatrix& X, const ConicTerm& t, const CMatrix& Zi) {
    const Eigen::Index s = X.rows();
    if (t.col_support.empty() || static_cast<Eigen::Index>(t.col_support.size()) == s)
        return X * t.mat * Zi;
    const Eigen::Index c = static_cast<Eigen::Index>(t.col_support.size());
    CMatrix Acols(s, c), Zrows(c, s);
    for (Eigen::Index j = 0; j < c; ++j) {
        Acols.col(j) = t.mat.col(t.col_support[j]);
        Zrows.row(j) = Zi.row(t.col_support[j]);
    }
    return (X * Acols) * Zrows;
}

double max_step(const CMatrix& X, const CMatrix& dX) {
    Eigen::LLT<CMatrix> llt(X);
    if (llt.info() != Eigen::Success) return 0.0;
    CMatrix L = llt.matrixL();
    CMatrix W1 = L.triangularView<Eigen::Lower>().solve(dX);
    CMatrix W2 = L.triangularView<Eigen::Lower>().solve(CMatrix(W1.adjoint()));
    CMatrix W = W2.adjoint();
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (W + W.adjoint()),
                                               Eigen::EigenvaluesOnly);
    double lmin = eig.eigenvalues().minCoeff();
    if (lmin >= 0) return std::numeric_limits<double>::infinity();
    return -1.0 / lmin;
}

struct Workspace {
    std::vector<CMatrix> X, Z, Zi, G, R2, Corr, S;  // S = X*C*Zi per block
    std::vector<double> y;
    double tau = 1.0, kappa = 1.0;
};

}  // namespace

ConicSolution solve_conic(const ConicProgram& prog, const SolveOptions& opts) {
    const int nb = static_cast<int>(prog.block_dims.size());
    const int m = static_cast<int>(prog.constraints.size());
    ConicSolution out;

    // Normalize constraint rows and the objective.
    std::vector<double> row_scale(m, 1.0);
    std::vector<ConicConstraint> cons = prog.constraints;
    for (int i = 0; i < m; ++i) {
        double nrm = 0.0;
        for (auto& t : cons[i].terms) nrm += t.mat.squaredNorm();
        nrm = std::sqrt(nrm);
        double s = std::max(nrm, 1e-12);
        row_scale[i] = s;
        for (auto& t : cons[i].terms) {
            t.mat /= s;
            if (t.row_support.empty()) fill_term_support(t);
        }
        cons[i].rhs /= s;
    }
    double cnorm = 0.0;
    for (const auto& c : prog.objective) cnorm += c.squaredNorm();
    const double obj_scale = std::max(std::sqrt(cnorm), 1.0);
    std::vector<CMatrix> C(nb);
    for (int b = 0; b < nb; ++b) C[b] = prog.objective[b] / obj_scale;
    RVector bvec(m);
    for (int i = 0; i < m; ++i) bvec(i) = cons[i].rhs;
    const double rhs_scale = std::max(bvec.norm(), 1.0);
    bvec /= rhs_scale;

    double nu = 1.0;
    Workspace w;
    w.X.resize(nb);
    w.Z.resize(nb);
    w.Zi.resize(nb);
    w.G.resize(nb);
    w.R2.resize(nb);
    w.Corr.resize(nb);
    w.S.resize(nb);
    for (int b = 0; b < nb; ++b) {
        w.X[b] = CMatrix::Identity(prog.block_dims[b], prog.block_dims[b]);
        w.Z[b] = w.X[b];
        nu += prog.block_dims[b];
    }
    w.y.assign(m, 0.0);

    auto apply_A = [&](const std::vector<CMatrix>& blocks) {
        RVector v(m);
        for (int i = 0; i < m; ++i) {
            double acc = 0.0;
            for (const auto& t : cons[i].terms) acc += supported_inner(t, blocks[t.block]);
            v(i) = acc;
        }
        return v;
    };
    auto apply_At = [&](const RVector& yv) {
        std::vector<CMatrix> blocks(nb);
        for (int b = 0; b < nb; ++b)
            blocks[b] = CMatrix::Zero(prog.block_dims[b], prog.block_dims[b]);
        for (int i = 0; i < m; ++i)
            for (const auto& t : cons[i].terms) blocks[t.block] += yv(i) * t.mat;
        return blocks;
    };
    auto inner_C = [&](const std::vector<CMatrix>& blocks) {
        double acc = 0.0;
        for (int b = 0; b < nb; ++b) acc += real_inner(C[b], blocks[b]);
        return acc;
    };

    auto finish_optimal = [&](double pobj, double dobj, double relgap, double pres,
                              double dres, int iters) {
        out.status = SdpStatus::Optimal;
        out.X.resize(nb);
        out.Z.resize(nb);
        for (int b = 0; b < nb; ++b) {
            out.X[b] = w.X[b] / w.tau * rhs_scale;
            out.Z[b] = w.Z[b] / w.tau * obj_scale;
        }
        out.y.resize(m);
        for (int i = 0; i < m; ++i) out.y[i] = w.y[i] / w.tau * obj_scale / row_scale[i];
        out.objective = pobj * obj_scale * rhs_scale;
        out.dual_objective = dobj * obj_scale * rhs_scale;
        out.gap = relgap;
        out.primal_residual = pres;
        out.dual_residual = dres;
        out.iterations = iters;
    };

    // Near a degenerate optimum the step size can collapse before the
    // requested tolerance is met.  If the current iterate is already accurate
    // to a modest fixed bar, return it as optimal (flagged in the message)
    // instead of discarding a usable point.
    auto accept_reduced = [&](double pobj, double dobj, double relgap, double pres,
                              double dres, double compl_gap, int iters,
                              const char* why) {
        const double gap_bar = std::max(opts.gap_tol, 1e-7);
        const double feas_bar = std::max(opts.feas_tol, 1e-7);
        if (!(relgap <= gap_bar && compl_gap <= gap_bar && pres <= feas_bar &&
              dres <= feas_bar))
            return false;
        finish_optimal(pobj, dobj, relgap, pres, dres, iters);
        out.message = std::string("reduced precision (") + why + ")";
        return true;
    };

    if (m == 0) {
        double lmin = 0.0;
        for (int b = 0; b < nb; ++b)
            lmin = std::min(lmin, Eigen::SelfAdjointEigenSolver<CMatrix>(
                                      C[b], Eigen::EigenvaluesOnly)
                                      .eigenvalues()
                                      .minCoeff());
        if (lmin >= -opts.feas_tol) {
            for (int b = 0; b < nb; ++b) w.X[b].setZero();
            w.tau = 1.0;
            finish_optimal(0.0, 0.0, 0.0, 0.0, 0.0, 0);
        } else {
            out.status = SdpStatus::DualInfeasible;
            out.message = "objective unbounded below on the PSD cone";
        }
        return out;
    }

    RVector yv = RVector::Zero(m);
    double mu0 = 0.0;
    // De-homogenized statistics of the most recent iterate, shared by the
    // convergence test and the reduced-precision exits.
    double pobj = 0.0, dobj = 0.0, relgap = 1.0, pres = 1.0, dres = 1.0;
    double compl_gap = 1.0;
    int last_iter = 0;

    for (int iter = 0; iter < opts.max_iters; ++iter) {
        last_iter = iter;
        // Residuals of the self-dual model.
        RVector r1 = bvec * w.tau - apply_A(w.X);
        std::vector<CMatrix> Aty = apply_At(yv);
        double cx = inner_C(w.X);
        double by = bvec.dot(yv);
        for (int b = 0; b < nb; ++b) w.R2[b] = C[b] * w.tau - Aty[b] - w.Z[b];
        double r3 = w.kappa + cx - by;

        double xz = 0.0;
        for (int b = 0; b < nb; ++b) xz += real_inner(w.X[b], w.Z[b]);
        double mu = (xz + w.tau * w.kappa) / nu;
        if (iter == 0) mu0 = mu;

        // Convergence on the de-homogenized point.
        pobj = cx / w.tau;
        dobj = by / w.tau;
        relgap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
        pres = (apply_A(w.X) / w.tau - bvec).norm() / (1.0 + bvec.norm());
        dres = 0.0;
        double cfro = 0.0;
        for (int b = 0; b < nb; ++b) {
            dres = std::max(dres, (Aty[b] / w.tau + w.Z[b] / w.tau - C[b]).norm());
            cfro += C[b].squaredNorm();
        }
        dres /= 1.0 + std::sqrt(cfro);
        compl_gap = xz / (w.tau * w.tau) / (1.0 + std::abs(pobj) + std::abs(dobj));
        if (relgap <= opts.gap_tol && compl_gap <= std::max(opts.gap_tol * 10, 1e-8) &&
            pres <= opts.feas_tol && dres <= opts.feas_tol) {
            finish_optimal(pobj, dobj, relgap, pres, dres, iter);
            return out;
        }

        // Infeasibility via the embedding ratio test.
        if (w.kappa / w.tau >= opts.infeas_ratio) {
            double ray_d = 0.0;
            for (int b = 0; b < nb; ++b) ray_d = std::max(ray_d, (Aty[b] + w.Z[b]).norm());
            bool primal_cert = by > 1e-10 && ray_d / by < 1e-6;
            double ax = apply_A(w.X).norm();
            bool dual_cert = cx < -1e-10 && ax / (-cx) < 1e-6;
            if (primal_cert) {
                out.status = SdpStatus::PrimalInfeasible;
                out.y.resize(m);
                for (int i = 0; i < m; ++i) out.y[i] = yv(i) / by / row_scale[i];
                out.Z.resize(nb);
                for (int b = 0; b < nb; ++b) out.Z[b] = w.Z[b] / by;
                out.iterations = iter;
                out.message = "Farkas certificate: A*(y) <= 0 with b.y = 1";
                return out;
            }
            if (dual_cert) {
                out.status = SdpStatus::DualInfeasible;
                out.X.resize(nb);
                for (int b = 0; b < nb; ++b) out.X[b] = w.X[b] / (-cx);
                out.iterations = iter;
                out.message = "improving ray: A(X) = 0, <C,X> = -1, X psd";
                return out;
            }
            out.status = SdpStatus::Indeterminate;
            out.message = "embedding collapsed without a clean certificate";
            out.iterations = iter;
            return out;
        }

        // Block factorizations.
        std::vector<Eigen::LLT<CMatrix>> lltZ(nb);
        bool fact_ok = true;
        for (int b = 0; b < nb; ++b) {
            lltZ[b].compute(w.Z[b]);
            if (lltZ[b].info() != Eigen::Success) {
                fact_ok = false;
                break;
            }
            CMatrix zi = lltZ[b].solve(CMatrix::Identity(prog.block_dims[b], prog.block_dims[b]));
            w.Zi[b] = 0.5 * (zi + zi.adjoint());
            w.S[b] = w.X[b] * C[b] * w.Zi[b];
        }
        if (!fact_ok) {
            if (accept_reduced(pobj, dobj, relgap, pres, dres, compl_gap, iter,
                               "slack factorization failed"))
                return out;
            out.status = SdpStatus::Indeterminate;
            out.message = "NumericalBreakdown: slack factorization failed";
            out.iterations = iter;
            return out;
        }

        // Schur complement M, h = u + b.
        std::vector<std::vector<CMatrix>> T(m);
        for (int j = 0; j < m; ++j) {
            T[j].resize(cons[j].terms.size());
            for (size_t t = 0; t < cons[j].terms.size(); ++t) {
                const auto& term = cons[j].terms[t];
                T[j][t] = scaled_product(w.X[term.block], term, w.Zi[term.block]);
            }
        }
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                double acc = 0.0;
                for (const auto& ti : cons[i].terms)
                    for (size_t t = 0; t < cons[j].terms.size(); ++t)
                        if (cons[j].terms[t].block == ti.block)
                            acc += supported_inner(ti, T[j][t]);
                M(i, j) = acc;
            }
        M = 0.5 * (M + M.transpose()).eval();
        RVector u(m);
        for (int i = 0; i < m; ++i) {
            double acc = 0.0;
            for (const auto& t : cons[i].terms) acc += supported_inner(t, w.S[t.block]);
            u(i) = acc;
        }
        double v = inner_C(w.S);
        RVector h = u + bvec;

        Eigen::LDLT<Eigen::MatrixXd> ldlt;
        double jitter = 0.0;
        for (int attempt = 0; attempt < 6; ++attempt) {
            Eigen::MatrixXd Mreg = M;
            if (jitter > 0) Mreg.diagonal().array() += jitter;
            ldlt.compute(Mreg);
            if (ldlt.info() == Eigen::Success && ldlt.isPositive()) break;
            jitter = jitter == 0 ? 1e-13 * std::max(1.0, M.trace() / m) : jitter * 100;
        }

        auto solve_direction = [&](double sigma, const std::vector<CMatrix>* corrX,
                                   double corr_tau, RVector& dy, std::vector<CMatrix>& dX,
                                   std::vector<CMatrix>& dZ, double& dtau, double& dkappa) {
            for (int b = 0; b < nb; ++b) {
                CMatrix g = -w.X[b] - w.X[b] * w.R2[b] * w.Zi[b];
                if (sigma > 0)
                    g += sigma * mu * w.Zi[b];
                if (corrX) g -= (*corrX)[b] * w.Zi[b];
                w.G[b] = g;
            }
            double cc = sigma * mu - w.tau * w.kappa - corr_tau;
            RVector AG = apply_A(w.G);
            RVector q1 = r1 - AG;
            double q2 = -r3 - inner_C(w.G) - cc / w.tau;
            RVector dy1 = ldlt.solve(q1);
            RVector dyh = ldlt.solve(h);
            double denom = (u - bvec).dot(dyh) - v - w.kappa / w.tau;
            if (std::abs(denom) < 1e-300) denom = -1e-300;
            dtau = (q2 - (u - bvec).dot(dy1)) / denom;
            dy = dy1 + dtau * dyh;
            std::vector<CMatrix> Atdy = apply_At(dy);
            dZ.resize(nb);
            dX.resize(nb);
            for (int b = 0; b < nb; ++b) {
                dZ[b] = w.R2[b] - Atdy[b] + C[b] * dtau;
                CMatrix dx = w.G[b] + w.X[b] * Atdy[b] * w.Zi[b] - dtau * w.S[b];
                dX[b] = 0.5 * (dx + dx.adjoint());
            }
            dkappa = (cc - w.kappa * dtau) / w.tau;
        };

        auto step_bound = [&](const std::vector<CMatrix>& dX, const std::vector<CMatrix>& dZ,
                              double dtau, double dkappa) {
            double a = std::numeric_limits<double>::infinity();
            for (int b = 0; b < nb; ++b) {
                a = std::min(a, max_step(w.X[b], dX[b]));
                a = std::min(a, max_step(w.Z[b], dZ[b]));
            }
            if (dtau < 0) a = std::min(a, -w.tau / dtau);
            if (dkappa < 0) a = std::min(a, -w.kappa / dkappa);
            return a;
        };

        RVector dy_a;
        std::vector<CMatrix> dX_a, dZ_a;
        double dtau_a, dkappa_a;
        solve_direction(0.0, nullptr, 0.0, dy_a, dX_a, dZ_a, dtau_a, dkappa_a);
        double alpha_a = std::min(1.0, 0.98 * step_bound(dX_a, dZ_a, dtau_a, dkappa_a));

        double xz_a = 0.0;
        for (int b = 0; b < nb; ++b)
            xz_a += real_inner(w.X[b] + alpha_a * dX_a[b], w.Z[b] + alpha_a * dZ_a[b]);
        double mu_a = (xz_a + (w.tau + alpha_a * dtau_a) * (w.kappa + alpha_a * dkappa_a)) / nu;
        double sigma = std::pow(std::clamp(mu_a / mu, 0.0, 1.0), 3.0);
        sigma = std::clamp(sigma, 1e-8, 1.0 - 1e-8);

        std::vector<CMatrix> corrX(nb);
        for (int b = 0; b < nb; ++b) corrX[b] = dX_a[b] * dZ_a[b];
        double corr_tau = dtau_a * dkappa_a;

        RVector dy;
        std::vector<CMatrix> dX, dZ;
        double dtau, dkappa;
        solve_direction(sigma, &corrX, corr_tau, dy, dX, dZ, dtau, dkappa);
        double alpha = std::min(1.0, 0.98 * step_bound(dX, dZ, dtau, dkappa));
        if (std::getenv("OPSYS_SDP_DEBUG")) {
            RVector n1 = apply_A(dX) - bvec * dtau - r1;
            std::vector<CMatrix> Atdy2 = apply_At(dy);
            double n2 = 0.0;
            for (int b = 0; b < nb; ++b)
                n2 = std::max(n2, (Atdy2[b] + dZ[b] - C[b] * dtau - w.R2[b]).norm());
            double n3 = dkappa + inner_C(dX) - bvec.dot(dy) + r3;
            std::fprintf(stderr,
                         "it=%d mu=%.3e tau=%.3e kap=%.3e sig=%.2e aA=%.2e a=%.3f "
                         "N1=%.2e N2=%.2e N3=%.2e relgap=%.2e pres=%.2e dres=%.2e\n",
                         iter, mu, w.tau, w.kappa, sigma, alpha_a, alpha, n1.norm(), n2,
                         n3, relgap, pres, dres);
        }
        if (!(alpha > 1e-14)) {
            if (accept_reduced(pobj, dobj, relgap, pres, dres, compl_gap, iter,
                               "vanishing step"))
                return out;
            out.status = SdpStatus::Indeterminate;
            out.message = "NumericalBreakdown: vanishing step";
            out.iterations = iter;
            return out;
        }

        // Backtrack if the new point fails to factorize (roundoff at the cone
        // boundary); the step bound alone is not always enough.
        bool stepped = false;
        for (int bt = 0; bt < 12 && !stepped; ++bt) {
            stepped = true;
            std::vector<CMatrix> nX(nb), nZ(nb);
            for (int b = 0; b < nb && stepped; ++b) {
                CMatrix cx1 = w.X[b] + alpha * dX[b];
                CMatrix cz1 = w.Z[b] + alpha * dZ[b];
                nX[b] = 0.5 * (cx1 + cx1.adjoint());
                nZ[b] = 0.5 * (cz1 + cz1.adjoint());
                if (Eigen::LLT<CMatrix>(nX[b]).info() != Eigen::Success ||
                    Eigen::LLT<CMatrix>(nZ[b]).info() != Eigen::Success)
                    stepped = false;
            }
            if (stepped) {
                w.X = std::move(nX);
                w.Z = std::move(nZ);
            } else {
                alpha *= 0.7;
            }
        }
        if (!stepped) {
            if (accept_reduced(pobj, dobj, relgap, pres, dres, compl_gap, iter,
                               "could not stay inside the cone"))
                return out;
            out.status = SdpStatus::Indeterminate;
            out.message = "NumericalBreakdown: could not stay inside the cone";
            out.iterations = iter;
            return out;
        }
        yv += alpha * dy;
        for (int i = 0; i < m; ++i) w.y[i] = yv(i);
        w.tau += alpha * dtau;
        w.kappa += alpha * dkappa;

        if (mu < 1e-16 * mu0 && iter > 10) {
            if (accept_reduced(pobj, dobj, relgap, pres, dres, compl_gap, iter,
                               "barrier collapsed"))
                return out;
            out.status = SdpStatus::Indeterminate;
            out.message = "NumericalBreakdown: barrier collapsed before convergence";
            out.iterations = iter;
            return out;
        }
    }

    if (accept_reduced(pobj, dobj, relgap, pres, dres, compl_gap, last_iter,
                       "iteration limit"))
        return out;
    out.status = SdpStatus::Indeterminate;
    out.message = "iteration limit reached";
    out.iterations = opts.max_iters;
    return out;
}

namespace {

// Nullspace elimination of equality rows a.y = b.
struct EqElim {
    Eigen::MatrixXd N;      // num_vars x reduced
    Eigen::VectorXd y0;     // particular solution
    bool feasible = true;
};

EqElim eliminate_equalities(const SdpProblem& p) {
    EqElim e;
    const int m = p.num_vars;
    const int q = static_cast<int>(p.equalities.size());
    if (q == 0) {
        e.N = Eigen::MatrixXd::Identity(m, m);
        e.y0 = Eigen::VectorXd::Zero(m);
        return e;
    }
    Eigen::MatrixXd A(q, m);
    Eigen::VectorXd rhs(q);
    for (int i = 0; i < q; ++i) {
        for (int j = 0; j < m; ++j) A(i, j) = p.equalities[i].a[j];
        rhs(i) = p.equalities[i].b;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV | Eigen::ComputeThinU);
    e.y0 = svd.solve(rhs);
    if ((A * e.y0 - rhs).norm() > 1e-8 * (1.0 + rhs.norm())) {
        e.feasible = false;
        return e;
    }
    double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    int rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > 1e-12 * std::max(smax, 1.0)) ++rank;
    e.N = svd.matrixV().rightCols(m - rank);
    return e;
}

// Tighten a Farkas certificate by alternating projection between the affine
// space {<F_i, Z> = 0 for all i} and the PSD cone; certificates that are
// strictly positive on their support converge to machine precision fast.
void refine_farkas(const SdpProblem& p, std::vector<CMatrix>& Z) {
    const size_t nb = p.blocks.size();
    auto dot = [&](const std::vector<CMatrix>& a, const std::vector<CMatrix>& b) {
        double acc = 0.0;
        for (size_t k = 0; k < nb; ++k) acc += real_inner(a[k], b[k]);
        return acc;
    };
    std::vector<std::vector<CMatrix>> dirs;
    for (int i = 0; i < p.num_vars; ++i) {
        std::vector<CMatrix> g(nb);
        double scale = 0.0;
        for (size_t b = 0; b < nb; ++b) {
            g[b] = p.blocks[b].F[i + 1];
            scale = std::max(scale, g[b].norm());
        }
        for (const auto& d : dirs) {
            double c = dot(d, g);
            for (size_t b = 0; b < nb; ++b) g[b] -= c * d[b];
        }
        double n = std::sqrt(std::max(dot(g, g), 0.0));
        if (n > 1e-12 * std::max(1.0, scale)) {
            for (auto& gb : g) gb /= n;
            dirs.push_back(std::move(g));
        }
    }
    for (int round = 0; round < 60; ++round) {
        for (const auto& d : dirs) {
            double c = dot(d, Z);
            for (size_t b = 0; b < nb; ++b) Z[b] -= c * d[b];
        }
        double neg = 0.0, lin = 0.0, znorm = 0.0;
        for (size_t b = 0; b < nb; ++b) {
            EigResult e = hermitian_eig(hermitian_part(Z[b]), 1.0);
            neg = std::min(neg, e.values.minCoeff());
            RVector vals = e.values.cwiseMax(0.0);
            Z[b] = e.vectors * vals.cast<Complex>().asDiagonal() * e.vectors.adjoint();
            Z[b] = hermitian_part(Z[b]);
            znorm = std::max(znorm, Z[b].norm());
        }
        for (const auto& d : dirs) lin = std::max(lin, std::abs(dot(d, Z)));
        if (-neg < 1e-14 * std::max(1.0, znorm) && lin < 1e-13 * std::max(1.0, znorm)) break;
    }
    double f0z = 0.0;
    for (size_t b = 0; b < nb; ++b) f0z += real_inner(p.blocks[b].F[0], Z[b]);
    if (f0z < -1e-12)
        for (auto& z : Z) z /= -f0z;
}

// Tighten an improving ray: alternate a PSD clip of D(y) = sum_i y_i F_i with
// a least-squares fit of y (inside the equality nullspace) to the clip.
void refine_ray(const SdpProblem& p, const Eigen::MatrixXd& N, std::vector<double>& yray) {
    const size_t nb = p.blocks.size();
    const int mr = static_cast<int>(N.cols());
    if (mr == 0) return;
    std::vector<std::vector<CMatrix>> Fr(mr);
    for (int j = 0; j < mr; ++j) {
        Fr[j].resize(nb);
        for (size_t b = 0; b < nb; ++b) {
            CMatrix f = CMatrix::Zero(p.blocks[b].dim, p.blocks[b].dim);
            for (int i = 0; i < p.num_vars; ++i)
                if (std::abs(N(i, j)) > 0) f += N(i, j) * p.blocks[b].F[i + 1];
            Fr[j][b] = f;
        }
    }
    Eigen::MatrixXd G(mr, mr);
    for (int j = 0; j < mr; ++j)
        for (int l = 0; l <= j; ++l) {
            double acc = 0.0;
            for (size_t b = 0; b < nb; ++b) acc += real_inner(Fr[j][b], Fr[l][b]);
            G(j, l) = G(l, j) = acc;
        }
    G.diagonal().array() += 1e-12 * std::max(1.0, G.trace() / mr);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(G);

    Eigen::VectorXd yv(p.num_vars);
    for (int i = 0; i < p.num_vars; ++i) yv(i) = yray[i];
    Eigen::VectorXd z = N.transpose() * yv;
    for (int round = 0; round < 60; ++round) {
        double neg = 0.0, scale = 1.0;
        std::vector<CMatrix> clip(nb);
        for (size_t b = 0; b < nb; ++b) {
            CMatrix D = CMatrix::Zero(p.blocks[b].dim, p.blocks[b].dim);
            for (int j = 0; j < mr; ++j) D += z(j) * Fr[j][b];
            EigResult e = hermitian_eig(hermitian_part(D), 1.0);
            neg = std::min(neg, e.values.minCoeff());
            scale = std::max(scale, std::abs(e.values.maxCoeff()));
            RVector vals = e.values.cwiseMax(0.0);
            clip[b] = e.vectors * vals.cast<Complex>().asDiagonal() * e.vectors.adjoint();
        }
        if (-neg < 1e-14 * scale) break;
        Eigen::VectorXd rhs(mr);
        for (int j = 0; j < mr; ++j) {
            double acc = 0.0;
            for (size_t b = 0; b < nb; ++b) acc += real_inner(Fr[j][b], clip[b]);
            rhs(j) = acc;
        }
        z = ldlt.solve(rhs);
    }
    yv = N * z;
    double cy = 0.0;
    for (int i = 0; i < p.num_vars; ++i) cy += p.c[i] * yv(i);
    if (cy < -1e-12) yv /= -cy;
    for (int i = 0; i < p.num_vars; ++i) yray[i] = yv(i);
}

}  // namespace

SdpSolution solve_sdp(const SdpProblem& prob, const SolveOptions& opts) {
    SdpSolution sol;
    for (const auto& blk : prob.blocks)
        if (static_cast<int>(blk.F.size()) != prob.num_vars + 1)
            throw DimensionMismatch("solve_sdp: block has wrong number of coefficient matrices");
    if (static_cast<int>(prob.c.size()) != prob.num_vars)
        throw DimensionMismatch("solve_sdp: objective length mismatch");

    EqElim elim = eliminate_equalities(prob);
    if (!elim.feasible) {
        sol.status = SdpStatus::PrimalInfeasible;
        sol.message = "equality rows are inconsistent";
        return sol;
    }
    const int mr = static_cast<int>(elim.N.cols());

    // Reduced LMI: F'_0 = F_0 + sum_i (y0)_i F_i, F'_j = sum_i N_ij F_i.
    ConicProgram cp;
    cp.block_dims.reserve(prob.blocks.size());
    for (const auto& blk : prob.blocks) cp.block_dims.push_back(blk.dim);
    cp.objective.resize(prob.blocks.size());
    for (size_t b = 0; b < prob.blocks.size(); ++b) {
        CMatrix F0 = prob.blocks[b].F[0];
        for (int i = 0; i < prob.num_vars; ++i)
            if (std::abs(elim.y0(i)) > 0) F0 += elim.y0(i) * prob.blocks[b].F[i + 1];
        cp.objective[b] = F0;
    }
    Eigen::VectorXd cvec(prob.num_vars);
    for (int i = 0; i < prob.num_vars; ++i) cvec(i) = prob.c[i];
    Eigen::VectorXd cred = elim.N.transpose() * cvec;
    const double const_shift = cvec.dot(elim.y0);

    cp.constraints.resize(mr);
    for (int j = 0; j < mr; ++j) {
        cp.constraints[j].rhs = cred(j);
        for (size_t b = 0; b < prob.blocks.size(); ++b) {
            CMatrix Fj = CMatrix::Zero(prob.blocks[b].dim, prob.blocks[b].dim);
            for (int i = 0; i < prob.num_vars; ++i)
                if (std::abs(elim.N(i, j)) > 0) Fj += elim.N(i, j) * prob.blocks[b].F[i + 1];
            if (Fj.norm() > 0) {
                ConicTerm t;
                t.block = static_cast<int>(b);
                t.mat = Fj;
                fill_term_support(t);
                cp.constraints[j].terms.push_back(std::move(t));
            }
        }
    }

    ConicSolution cs = solve_conic(cp, opts);
    sol.iterations = cs.iterations;
    sol.gap = cs.gap;
    sol.primal_residual = cs.primal_residual;
    sol.dual_residual = cs.dual_residual;
    sol.message = cs.message;

    switch (cs.status) {
        case SdpStatus::Optimal: {
            // Internal dual variables ytilde solve max b.y with F_0 - sum ytilde_i F'_i psd;
            // the user's LMI point is y = y0 - N ytilde.
            Eigen::VectorXd yt(mr);
            for (int j = 0; j < mr; ++j) yt(j) = cs.y[j];
            Eigen::VectorXd yuser = elim.y0 - elim.N * yt;
            sol.y.assign(yuser.data(), yuser.data() + prob.num_vars);
            sol.Z = cs.X;
            sol.status = SdpStatus::Optimal;
            sol.objective = -cs.dual_objective + const_shift;
            sol.dual_objective = -cs.objective + const_shift;
            break;
        }
        case SdpStatus::PrimalInfeasible: {
            // Internal primal infeasible: improving ray for the user's minimization.
            Eigen::VectorXd yt(mr);
            for (int j = 0; j < mr; ++j) yt(j) = cs.y[j];
            Eigen::VectorXd ray = -elim.N * yt;
            sol.y.assign(ray.data(), ray.data() + prob.num_vars);
            refine_ray(prob, elim.N, sol.y);
            sol.status = SdpStatus::DualInfeasible;
            sol.message = "objective unbounded below; y holds an improving ray";
            break;
        }
        case SdpStatus::DualInfeasible: {
            sol.Z = cs.X;
            refine_farkas(prob, sol.Z);
            sol.status = SdpStatus::PrimalInfeasible;
            sol.message = "no feasible point; Z holds the Farkas certificate";
            break;
        }
        default:
            sol.status = SdpStatus::Indeterminate;
            break;
    }
    return sol;
}

CertificateReport check_certificate(const SdpProblem& prob, const SdpSolution& sol, double tol) {
    CertificateReport rep;
    std::ostringstream msg;
    double worst = 0.0;

    auto lmi_value = [&](size_t b, const std::vector<double>& y) {
        CMatrix F = prob.blocks[b].F[0];
        for (int i = 0; i < prob.num_vars; ++i) F += y[i] * prob.blocks[b].F[i + 1];
        return F;
    };

    if (sol.status == SdpStatus::Optimal) {
        double scale = 1.0;
        for (size_t b = 0; b < prob.blocks.size(); ++b) {
            CMatrix F = lmi_value(b, sol.y);
            scale = std::max(scale, op_norm(F));
            worst = std::max(worst, -lambda_min(F));
        }
        for (const auto& eq : prob.equalities) {
            double acc = -eq.b;
            for (int i = 0; i < prob.num_vars; ++i) acc += eq.a[i] * sol.y[i];
            worst = std::max(worst, std::abs(acc));
        }
        double obj = 0.0;
        for (int i = 0; i < prob.num_vars; ++i) obj += prob.c[i] * sol.y[i];
        worst = std::max(worst, std::abs(obj - sol.objective) / (1.0 + std::abs(obj)));
        // Multiplier side: Z psd, <F_i, Z> = c_i, complementarity <F(y), Z> ~ 0.
        if (sol.Z.size() == prob.blocks.size()) {
            double znorm = 1.0;
            for (const auto& z : sol.Z) znorm = std::max(znorm, op_norm(z));
            for (size_t b = 0; b < prob.blocks.size(); ++b)
                worst = std::max(worst, -lambda_min(sol.Z[b]) / znorm);
            if (prob.equalities.empty()) {
                for (int i = 0; i < prob.num_vars; ++i) {
                    double acc = -prob.c[i];
                    for (size_t b = 0; b < prob.blocks.size(); ++b)
                        acc += real_inner(prob.blocks[b].F[i + 1], sol.Z[b]);
                    worst = std::max(worst, std::abs(acc) / (1.0 + std::abs(prob.c[i])) /
                                                std::max(1.0, znorm));
                }
            }
            double gap = 0.0;
            for (size_t b = 0; b < prob.blocks.size(); ++b)
                gap += real_inner(lmi_value(b, sol.y), sol.Z[b]);
            worst = std::max(worst, std::abs(gap) / (1.0 + scale * znorm));
        }
        msg << "optimality check";
    } else if (sol.status == SdpStatus::PrimalInfeasible) {
        double znorm = 0.0;
        for (const auto& z : sol.Z) znorm = std::max(znorm, op_norm(z));
        if (znorm <= 0) {
            rep.detail = "empty Farkas certificate";
            return rep;
        }
        double f0z = 0.0;
        for (size_t b = 0; b < prob.blocks.size(); ++b) {
            worst = std::max(worst, -lambda_min(sol.Z[b]) / znorm);
            f0z += real_inner(prob.blocks[b].F[0], sol.Z[b]);
        }
        for (int i = 0; i < prob.num_vars; ++i) {
            double acc = 0.0;
            for (size_t b = 0; b < prob.blocks.size(); ++b)
                acc += real_inner(prob.blocks[b].F[i + 1], sol.Z[b]);
            worst = std::max(worst, std::abs(acc) / znorm);
        }
        if (f0z >= -tol * znorm) worst = std::max(worst, 1.0);
        msg << "Farkas: <F0,Z> = " << f0z;
    } else if (sol.status == SdpStatus::DualInfeasible) {
        double ynorm = 0.0;
        for (double v : sol.y) ynorm = std::max(ynorm, std::abs(v));
        if (ynorm <= 0) {
            rep.detail = "empty ray";
            return rep;
        }
        double cy = 0.0;
        for (int i = 0; i < prob.num_vars; ++i) cy += prob.c[i] * sol.y[i];
        if (cy >= -tol * ynorm) worst = std::max(worst, 1.0);
        for (size_t b = 0; b < prob.blocks.size(); ++b) {
            CMatrix D = CMatrix::Zero(prob.blocks[b].dim, prob.blocks[b].dim);
            for (int i = 0; i < prob.num_vars; ++i) D += sol.y[i] * prob.blocks[b].F[i + 1];
            worst = std::max(worst, -lambda_min(D) / ynorm);
        }
        for (const auto& eq : prob.equalities) {
            double acc = 0.0;
            for (int i = 0; i < prob.num_vars; ++i) acc += eq.a[i] * sol.y[i];
            worst = std::max(worst, std::abs(acc) / ynorm);
        }
        msg << "ray: c.dy = " << cy;
    } else {
        rep.detail = "indeterminate solution has no certificate";
        return rep;
    }

    rep.worst_violation = worst;
    rep.ok = worst <= tol;
    rep.detail = msg.str();
    return rep;
}

}  // namespace opsys
