#include "opsys/maps.hpp"

#include <algorithm>
#include <cmath>

#include "opsys/rng.hpp"
#include "opsys/sdp.hpp"
#include "opsys/zoo.hpp"

namespace opsys {

namespace {

Eigen::VectorXcd to_vec(const std::vector<Complex>& v) {
    Eigen::VectorXcd out(static_cast<Eigen::Index>(v.size()));
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = v[static_cast<std::size_t>(i)];
    return out;
}

std::vector<Complex> to_std(const Eigen::VectorXcd& v) {
    return std::vector<Complex>(v.data(), v.data() + v.size());
}

CMatrix matrix_unit(int dim, int p, int q) {
    CMatrix m = CMatrix::Zero(dim, dim);
    m(p, q) = Complex(1, 0);
    return m;
}

CMatrix hermitian_part_of(const CMatrix& a) { return 0.5 * (a + a.adjoint()); }

void require_solved(const SdpSolution& sol, const char* where) {
    if (sol.status != SdpStatus::Optimal)
        throw ConvergenceFailure(std::string(where) + ": solve ended " + to_string(sol.status) +
                                 " (" + sol.message + ")");
}

void require_solved(const ConicSolution& sol, const char* where) {
    if (sol.status != SdpStatus::Optimal)
        throw ConvergenceFailure(std::string(where) + ": solve ended " + to_string(sol.status) +
                                 " (" + sol.message + ")");
}

// Isometry onto the range of the level-1 support projection.
CMatrix face_isometry(const OperatorSystem& s) {
    const FacialData& fd = max_rank_positive(s);
    CMatrix v(s.ambient_dim, fd.rank);
    if (fd.rank == 0) return v;
    EigResult eig = hermitian_eig(fd.P);
    int c = 0;
    for (int i = 0; i < s.ambient_dim; ++i)
        if (eig.values[i] > 0.5) v.col(c++) = eig.vectors.col(i);
    return v;
}

// Blockwise projection onto M_n(S).
CMatrix project_level(const OperatorSystem& s, int level, const CMatrix& u) {
    const int k = s.ambient_dim;
    CMatrix out(level * k, level * k);
    for (int i = 0; i < level; ++i)
        for (int j = 0; j < level; ++j)
            out.block(i * k, j * k, k, k) = s.space.project(u.block(i * k, j * k, k, k));
    return out;
}

// Complex HS-orthonormal basis of the orthogonal complement of the domain
// subspace inside M_k.
std::vector<CMatrix> complement_basis(const HSSubspace& space) {
    std::vector<CMatrix> comp;
    const int k = space.ambient_dim;
    for (int p = 0; p < k; ++p) {
        for (int q = 0; q < k; ++q) {
            CMatrix r = matrix_unit(k, p, q);
            r -= space.project(r);
            for (const CMatrix& c : comp) r -= hs_inner(r, c) * c;
            double nrm = hs_norm(r);
            if (nrm > 1e-9) comp.push_back(r / nrm);
        }
    }
    return comp;
}

}  // namespace

SystemMap map_from_action(const OperatorSystem& domain, const OperatorSystem& codomain,
                          const std::function<CMatrix(const CMatrix&)>& action, double tol) {
    SystemMap phi{domain, codomain,
                  Eigen::MatrixXcd::Zero(codomain.dim(), domain.dim())};
    for (int j = 0; j < domain.dim(); ++j) {
        CMatrix y = action(domain.space.basis[static_cast<std::size_t>(j)]);
        if (y.rows() != codomain.ambient_dim || y.cols() != codomain.ambient_dim)
            throw DomainMismatch("map action returns wrong ambient dimension");
        if (!codomain.space.contains(y, tol))
            throw DomainMismatch("map action leaves the codomain");
        phi.coeff.col(j) = to_vec(codomain.space.coefficients(y));
    }
    return phi;
}

SystemMap identity_map(const OperatorSystem& s) {
    return map_from_action(s, s, [](const CMatrix& x) { return x; });
}

SystemMap zero_map(const OperatorSystem& domain, const OperatorSystem& codomain) {
    return SystemMap{domain, codomain,
                     Eigen::MatrixXcd::Zero(codomain.dim(), domain.dim())};
}

SystemMap transpose_map(const OperatorSystem& s) {
    return map_from_action(s, s, [](const CMatrix& x) { return CMatrix(x.transpose()); });
}

SystemMap embed_codomain(const SystemMap& phi) {
    OperatorSystem full = full_system(phi.codomain.ambient_dim);
    const OperatorSystem& cod = phi.codomain;
    Eigen::MatrixXcd t(full.dim(), cod.dim());
    for (int j = 0; j < cod.dim(); ++j)
        t.col(j) = to_vec(full.space.coefficients(cod.space.basis[static_cast<std::size_t>(j)]));
    return SystemMap{phi.domain, full, t * phi.coeff};
}

CMatrix map_apply(const SystemMap& phi, const CMatrix& x, double tol) {
    if (x.rows() != phi.domain.ambient_dim || x.cols() != phi.domain.ambient_dim)
        throw DomainMismatch("element has wrong ambient dimension for the domain");
    if (!phi.domain.space.contains(x, tol))
        throw DomainMismatch("element lies outside the map's domain");
    Eigen::VectorXcd y = phi.coeff * to_vec(phi.domain.space.coefficients(x));
    return phi.codomain.space.from_coefficients(to_std(y));
}

CMatrix amplify_matrix(const SystemMap& phi, int level, const CMatrix& x) {
    const int k = phi.domain.ambient_dim;
    const int kc = phi.codomain.ambient_dim;
    if (x.rows() != level * k || x.cols() != level * k)
        throw DomainMismatch("amplified element has wrong dimension");
    CMatrix out(level * kc, level * kc);
    for (int i = 0; i < level; ++i)
        for (int j = 0; j < level; ++j)
            out.block(i * kc, j * kc, kc, kc) = map_apply(phi, x.block(i * k, j * k, k, k));
    return out;
}

LevelElement amplify(const SystemMap& phi, const LevelElement& x) {
    if (!same_system(x.system, phi.domain))
        throw DomainMismatch("element does not belong to the map's domain system");
    CMatrix m = amplify_matrix(phi, x.level, x.matrix);
    return make_level_element(phi.codomain, x.level, m, 1e-7);
}

SystemMap compose(const SystemMap& psi, const SystemMap& phi) {
    if (phi.codomain.ambient_dim != psi.domain.ambient_dim)
        throw DomainMismatch("composition: inner ambient dimensions differ");
    return map_from_action(phi.domain, psi.codomain, [&](const CMatrix& x) {
        return opsys::map_apply(psi, opsys::map_apply(phi, x));
    });
}

SystemMap adjoint_map(const SystemMap& phi) {
    return map_from_action(phi.domain, phi.codomain, [&](const CMatrix& x) {
        CMatrix xa = x.adjoint();
        return CMatrix(opsys::map_apply(phi, xa).adjoint());
    });
}

bool is_selfadjoint_map(const SystemMap& phi, double tol) {
    SystemMap adj = adjoint_map(phi);
    double scale = std::max(1.0, phi.coeff.norm());
    return (phi.coeff - adj.coeff).norm() <= tol * scale;
}

SystemMap add_maps(const SystemMap& a, const SystemMap& b) {
    if (a.coeff.rows() != b.coeff.rows() || a.coeff.cols() != b.coeff.cols())
        throw DomainMismatch("map sum: shapes differ");
    return SystemMap{a.domain, a.codomain, a.coeff + b.coeff};
}

SystemMap scale_map(const SystemMap& phi, Complex c) {
    return SystemMap{phi.domain, phi.codomain, c * phi.coeff};
}

double map_distance(const SystemMap& a, const SystemMap& b) {
    if (a.coeff.rows() != b.coeff.rows() || a.coeff.cols() != b.coeff.cols())
        throw DomainMismatch("map distance: shapes differ");
    return (a.coeff - b.coeff).norm();
}

ChoiData choi_of_map(const SystemMap& phi) {
    if (!is_matrix_algebra(phi.domain))
        throw DomainMismatch("block-matrix form needs a full matrix algebra domain");
    if (!is_matrix_algebra(phi.codomain))
        throw CodomainNotMatrixAlgebra("block-matrix form needs a full matrix algebra codomain");
    const int m = phi.domain.ambient_dim;
    const int n = phi.codomain.ambient_dim;
    CMatrix tau(m * n, m * n);
    for (int p = 0; p < m; ++p)
        for (int q = 0; q < m; ++q)
            tau.block(p * n, q * n, n, n) = map_apply(phi, matrix_unit(m, p, q));
    ChoiData d{m, n, tau,
               map_from_action(full_system(m), full_system(n),
                               [&phi](const CMatrix& x) { return opsys::map_apply(phi, x); })};
    return d;
}

ChoiData choi_from_matrix(const CMatrix& tau, int m, int n) {
    if (tau.rows() != m * n || tau.cols() != m * n)
        throw DimensionMismatch("block matrix has wrong size");
    ChoiData d{m, n, tau, zero_map(full_system(m), full_system(n))};
    d.map_form = map_from_action(d.map_form.domain, d.map_form.codomain, [&](const CMatrix& a) {
        CMatrix out = CMatrix::Zero(n, n);
        for (int p = 0; p < m; ++p)
            for (int q = 0; q < m; ++q) out += a(p, q) * tau.block(p * n, q * n, n, n);
        return out;
    });
    return d;
}

LevelFunctional make_functional(const OperatorSystem& s, int level, const CMatrix& rep) {
    const int d = level * s.ambient_dim;
    if (rep.rows() != d || rep.cols() != d)
        throw DimensionMismatch("functional representer has the wrong size");
    return LevelFunctional{s, level, project_level(s, level, rep), std::nullopt, std::nullopt};
}

Complex eval(const LevelFunctional& f, const CMatrix& u) {
    const int d = f.level * f.system.ambient_dim;
    if (u.rows() != d || u.cols() != d)
        throw DimensionMismatch("functional evaluated at the wrong level");
    return hs_inner(u, f.rep);  // Tr(rep^* u)
}

bool is_selfadjoint_functional(const LevelFunctional& f, double tol) {
    return is_hermitian(f.rep, tol);
}

double functional_rep_deviation(const LevelFunctional& f) {
    if (!f.norm_witness) return 0.0;
    double worst = 0.0;
    for (const CMatrix& v : level_sa_basis(f.system, f.level)) {
        Complex a = ((*f.norm_witness) * v).trace();
        worst = std::max(worst, std::abs(a - eval(f, v)));
    }
    return worst;
}

LevelFunctional upsilon(const SystemMap& phi) {
    if (!is_matrix_algebra(phi.codomain))
        throw CodomainNotMatrixAlgebra("the functional form needs a matrix algebra codomain");
    const int n = phi.codomain.ambient_dim;
    const int k = phi.domain.ambient_dim;
    CMatrix g = CMatrix::Zero(n * k, n * k);
    for (const CMatrix& b : phi.domain.space.basis) {
        CMatrix img = map_apply(phi, b);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                g.block(i * k, j * k, k, k) += std::conj(img(i, j)) * b;
    }
    return LevelFunctional{phi.domain, n, g, std::nullopt, std::nullopt};
}

SystemMap theta_of_functional(const LevelFunctional& f) {
    const OperatorSystem& x = f.system;
    const int n = f.level;
    const int k = x.ambient_dim;
    OperatorSystem cod = full_system(n);
    Eigen::MatrixXcd coeff(cod.dim(), x.dim());
    for (int t = 0; t < x.dim(); ++t) {
        const CMatrix& b = x.space.basis[static_cast<std::size_t>(t)];
        CMatrix img(n, n);
        for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q) {
                CMatrix e = CMatrix::Zero(n * k, n * k);
                e.block(p * k, q * k, k, k) = b;
                img(p, q) = eval(f, e);
            }
        coeff.col(t) = to_vec(cod.space.coefficients(img));
    }
    return SystemMap{x, cod, coeff};
}

CpReport is_completely_positive(const SystemMap& phi0, double feas_tol) {
    CpReport rep;
    double scale = std::max(1.0, phi0.coeff.norm());
    for (const CMatrix& b : phi0.domain.space.basis) {
        CMatrix ba = b.adjoint();
        double defect = hs_norm(CMatrix(map_apply(phi0, ba) - map_apply(phi0, b).adjoint()));
        if (defect > rep.adjoint_defect) {
            rep.adjoint_defect = defect;
            rep.witness = b;
        }
    }
    if (rep.adjoint_defect > 1e-10 * scale) {
        rep.cp = false;
        return rep;
    }
    rep.adjoint_defect = 0.0;
    rep.witness.reset();

    SystemMap phi = is_matrix_algebra(phi0.codomain) ? phi0 : embed_codomain(phi0);
    const int n = phi.codomain.ambient_dim;
    const FacialData& fd = max_rank_positive(phi.domain);
    if (fd.rank == 0) {
        rep.cp = true;
        rep.trivial_cone = true;
        return rep;
    }

    const std::vector<CMatrix>& span = cone_span_basis(phi.domain, n);
    CMatrix v1 = face_isometry(phi.domain);
    CMatrix v = kron(CMatrix::Identity(n, n), v1);
    LevelFunctional f = upsilon(phi);

    const int m = static_cast<int>(span.size());
    SdpProblem prob;
    prob.num_vars = m;
    prob.c.resize(static_cast<std::size_t>(m));
    SdpBlock blk;
    blk.dim = static_cast<int>(v.cols());
    blk.F.resize(static_cast<std::size_t>(m) + 1, CMatrix::Zero(blk.dim, blk.dim));
    SdpEquality trace_one;
    trace_one.a.resize(static_cast<std::size_t>(m));
    trace_one.b = 1.0;
    for (int s = 0; s < m; ++s) {
        const CMatrix& w = span[static_cast<std::size_t>(s)];
        prob.c[static_cast<std::size_t>(s)] = eval(f, w).real();
        blk.F[static_cast<std::size_t>(s) + 1] = v.adjoint() * w * v;
        trace_one.a[static_cast<std::size_t>(s)] = w.trace().real();
    }
    prob.blocks.push_back(std::move(blk));
    prob.equalities.push_back(std::move(trace_one));

    SolveOptions opts;
    opts.gap_tol = 1e-10;
    SdpSolution sol = solve_sdp(prob, opts);
    require_solved(sol, "complete positivity test");

    rep.min_value = sol.objective;
    rep.cp = rep.min_value >= -feas_tol;
    if (!rep.cp) {
        CMatrix u = CMatrix::Zero(n * phi.domain.ambient_dim, n * phi.domain.ambient_dim);
        for (int s = 0; s < m; ++s) u += sol.y[static_cast<std::size_t>(s)] * span[static_cast<std::size_t>(s)];
        rep.witness = u;
    }
    return rep;
}

namespace {

// Choi matrix (in M_k (x) M_n) of the extension of phi by zero on the
// orthogonal complement of its domain.
CMatrix choi_zero_extension(const SystemMap& phi) {
    const int k = phi.domain.ambient_dim;
    const int n = phi.codomain.ambient_dim;
    CMatrix j = CMatrix::Zero(k * n, k * n);
    for (int p = 0; p < k; ++p)
        for (int q = 0; q < k; ++q) {
            CMatrix pe = phi.domain.space.project(matrix_unit(k, p, q));
            if (hs_norm(pe) < 1e-14) continue;
            Eigen::VectorXcd y = phi.coeff * to_vec(phi.domain.space.coefficients(pe));
            j.block(p * n, q * n, n, n) = phi.codomain.space.from_coefficients(to_std(y));
        }
    return j;
}

// Complex basis of Choi matrices of maps M_k -> M_n vanishing on the domain:
// conj(g) (x) e^{p,q} for g spanning the complement of the domain.
std::vector<CMatrix> extension_choi_dirs(const HSSubspace& domain, int n) {
    std::vector<CMatrix> dirs;
    for (const CMatrix& g : complement_basis(domain)) {
        CMatrix gc = g.conjugate();
        for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q) dirs.push_back(kron(gc, matrix_unit(n, p, q)));
    }
    return dirs;
}

struct CbProgram {
    SdpProblem prob;
    int var_t = 0;  // index of the norm variable
};

// Factorization certificate: ||phi||_cb <= t iff the block [[J1, J],[J*, J2]]
// of Choi matrices is PSD for completely positive fillers with
// Tr_k J_i <= t I_n, minimized over all extensions of phi off its domain.
CbProgram cb_upper_program(const SystemMap& phi) {
    const int k = phi.domain.ambient_dim;
    const int n = phi.codomain.ambient_dim;
    const int kn = k * n;
    CMatrix j0 = choi_zero_extension(phi);
    std::vector<CMatrix> herm = full_hermitian_basis(kn);
    std::vector<CMatrix> dirs = extension_choi_dirs(phi.domain.space, n);

    const int nj = static_cast<int>(herm.size());
    const int nz = 2 * static_cast<int>(dirs.size());
    CbProgram cb;
    SdpProblem& prob = cb.prob;
    prob.num_vars = 2 * nj + nz + 1;
    cb.var_t = prob.num_vars - 1;
    prob.c.assign(static_cast<std::size_t>(prob.num_vars), 0.0);
    prob.c.back() = 1.0;

    SdpBlock b1;  // [[J1, J],[J*, J2]] >= 0
    b1.dim = 2 * kn;
    b1.F.assign(static_cast<std::size_t>(prob.num_vars) + 1, CMatrix());
    CMatrix f0 = CMatrix::Zero(2 * kn, 2 * kn);
    f0.block(0, kn, kn, kn) = j0;
    f0.block(kn, 0, kn, kn) = j0.adjoint();
    b1.F[0] = f0;
    SdpBlock b2;  // t I - Tr_k J1 >= 0
    b2.dim = n;
    b2.F.assign(static_cast<std::size_t>(prob.num_vars) + 1, CMatrix());
    b2.F[0] = CMatrix::Zero(n, n);
    SdpBlock b3 = b2;  // t I - Tr_k J2 >= 0

    auto zero_big = [&] { return CMatrix::Zero(2 * kn, 2 * kn); };
    for (int s = 0; s < nj; ++s) {
        CMatrix m1 = zero_big();
        m1.block(0, 0, kn, kn) = herm[static_cast<std::size_t>(s)];
        b1.F[static_cast<std::size_t>(s) + 1] = m1;
        b2.F[static_cast<std::size_t>(s) + 1] = -ptrace_first(herm[static_cast<std::size_t>(s)], k, n);

        CMatrix m2 = zero_big();
        m2.block(kn, kn, kn, kn) = herm[static_cast<std::size_t>(s)];
        b1.F[static_cast<std::size_t>(nj + s) + 1] = m2;
        b3.F[static_cast<std::size_t>(nj + s) + 1] = -ptrace_first(herm[static_cast<std::size_t>(s)], k, n);
    }
    for (int r = 0; r < static_cast<int>(dirs.size()); ++r) {
        const CMatrix& c = dirs[static_cast<std::size_t>(r)];
        CMatrix mre = zero_big();
        mre.block(0, kn, kn, kn) = c;
        mre.block(kn, 0, kn, kn) = c.adjoint();
        b1.F[static_cast<std::size_t>(2 * nj + 2 * r) + 1] = mre;
        CMatrix ci = Complex(0, 1) * c;
        CMatrix mim = zero_big();
        mim.block(0, kn, kn, kn) = ci;
        mim.block(kn, 0, kn, kn) = ci.adjoint();
        b1.F[static_cast<std::size_t>(2 * nj + 2 * r) + 2] = mim;
    }
    b1.F[static_cast<std::size_t>(cb.var_t) + 1] = zero_big();
    b2.F[static_cast<std::size_t>(cb.var_t) + 1] = CMatrix::Identity(n, n);
    b3.F[static_cast<std::size_t>(cb.var_t) + 1] = CMatrix::Identity(n, n);

    for (auto* blk : {&b1, &b2, &b3})
        for (auto& f : blk->F)
            if (f.size() == 0) f = CMatrix::Zero(blk->dim, blk->dim);

    prob.blocks.push_back(std::move(b1));
    prob.blocks.push_back(std::move(b2));
    prob.blocks.push_back(std::move(b3));
    return cb;
}

// Representer of x -> <xi, phi^(m)(x) eta> inside M_m(M_k), projected onto
// the domain level (the ball search only moves inside the domain).
CMatrix pairing_representer(const SystemMap& phi, int m, const Eigen::VectorXcd& xi,
                            const Eigen::VectorXcd& eta) {
    const int k = phi.domain.ambient_dim;
    const int n = phi.codomain.ambient_dim;
    CMatrix t = CMatrix::Zero(m * k, m * k);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            Eigen::VectorXcd xi_i = xi.segment(i * n, n);
            Eigen::VectorXcd eta_j = eta.segment(j * n, n);
            for (const CMatrix& b : phi.domain.space.basis) {
                Complex l = xi_i.dot(map_apply(phi, b) * eta_j);  // conj-linear in xi
                t.block(i * k, j * k, k, k) += std::conj(l) * b;
            }
        }
    return t;
}

// One ascent pass: from x, alternately take the top singular pair of the
// amplified image and re-maximize the pairing over the unit ball of M_m(X).
double ascend_once(const SystemMap& phi, int m, CMatrix x, int iters, double stop_at,
                   CMatrix* best_x) {
    const int k = phi.domain.ambient_dim;
    const bool full = is_matrix_algebra(phi.domain);
    double best = 0.0;
    for (int it = 0; it < iters; ++it) {
        CMatrix y = amplify_matrix(phi, m, x);
        Eigen::JacobiSVD<CMatrix> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
        double val = svd.singularValues()(0);
        if (val > best) {
            best = val;
            if (best_x) *best_x = x;
        }
        if (best >= stop_at) return best;
        Eigen::VectorXcd xi = svd.matrixU().col(0);
        Eigen::VectorXcd eta = svd.matrixV().col(0);
        CMatrix t = pairing_representer(phi, m, xi, eta);
        CMatrix xnew;
        if (full) {
            Eigen::JacobiSVD<CMatrix> pol(t, Eigen::ComputeThinU | Eigen::ComputeThinV);
            xnew = pol.matrixU() * pol.matrixV().adjoint();
        } else {
            // maximize Re Tr(T^* x) over the operator-norm unit ball of M_m(X)
            const int dim = m * k;
            const int nv = 2 * static_cast<int>(phi.domain.dim()) * m * m;
            SdpProblem prob;
            prob.num_vars = nv;
            prob.c.assign(static_cast<std::size_t>(nv), 0.0);
            SdpBlock ball;
            ball.dim = 2 * dim;
            ball.F.assign(static_cast<std::size_t>(nv) + 1, CMatrix());
            CMatrix f0 = CMatrix::Identity(2 * dim, 2 * dim);
            ball.F[0] = f0;
            int c = 0;
            std::vector<CMatrix> cdirs;
            cdirs.reserve(static_cast<std::size_t>(nv));
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j)
                    for (const CMatrix& b : phi.domain.space.basis) {
                        CMatrix e = CMatrix::Zero(dim, dim);
                        e.block(i * k, j * k, k, k) = b;
                        cdirs.push_back(e);
                        cdirs.push_back(Complex(0, 1) * e);
                    }
            for (const CMatrix& e : cdirs) {
                CMatrix f = CMatrix::Zero(2 * dim, 2 * dim);
                f.block(0, dim, dim, dim) = e;
                f.block(dim, 0, dim, dim) = e.adjoint();
                ball.F[static_cast<std::size_t>(c) + 1] = f;
                prob.c[static_cast<std::size_t>(c)] = -hs_inner(e, t).real();
                ++c;
            }
            prob.blocks.push_back(std::move(ball));
            SdpSolution sol = solve_sdp(prob);
            if (sol.status != SdpStatus::Optimal) break;
            xnew = CMatrix::Zero(dim, dim);
            for (int s = 0; s < nv; ++s)
                xnew += sol.y[static_cast<std::size_t>(s)] * cdirs[static_cast<std::size_t>(s)];
        }
        if ((xnew - x).norm() < 1e-12 * std::max(1.0, x.norm())) {
            x = xnew;
            CMatrix y2 = amplify_matrix(phi, m, x);
            best = std::max(best, op_norm(y2));
            if (best_x) *best_x = x;
            break;
        }
        x = xnew;
    }
    return best;
}

double cb_lower_bound(const SystemMap& phi, double target) {
    const int k = phi.domain.ambient_dim;
    const int n = phi.codomain.ambient_dim;
    const int max_level = std::max(n, 1);  // amplification to the codomain size suffices
    Rng rng(9001);
    double best = 0.0;
    const double stop_at = target - 1e-5 * std::max(1.0, target);
    CMatrix best_x;
    for (int m = 1; m <= max_level; ++m) {
        const int restarts = is_matrix_algebra(phi.domain) ? 8 : 4;
        const int iters = is_matrix_algebra(phi.domain) ? 40 : 15;
        for (int r = 0; r < restarts; ++r) {
            CMatrix x0;
            if (r == 0 && m == 1 &&
                phi.domain.space.contains(CMatrix::Identity(k, k), 1e-9)) {
                x0 = CMatrix::Identity(k, k);
            } else {
                x0 = random_element(phi.domain, m, rng).matrix;
                double nrm = op_norm(x0);
                if (nrm > 1e-12) x0 /= nrm;
            }
            best = std::max(best, ascend_once(phi, m, x0, iters, stop_at, &best_x));
            if (best >= stop_at) return best;
        }
    }
    // basin-hopping retries seeded from the best point found so far
    if (best_x.size() != 0) {
        int m = static_cast<int>(best_x.rows()) / k;
        for (int r = 0; r < 6 && best < stop_at; ++r) {
            CMatrix pert = best_x + 0.15 * random_element(phi.domain, m, rng).matrix;
            double nrm = op_norm(pert);
            if (nrm > 1e-12) pert /= nrm;
            best = std::max(best, ascend_once(phi, m, pert, 25, stop_at, nullptr));
        }
    }
    return best;
}

}  // namespace

double cb_norm(const SystemMap& phi0) {
    SystemMap phi = is_matrix_algebra(phi0.codomain) ? phi0 : embed_codomain(phi0);
    if (phi.coeff.norm() < 1e-14) return 0.0;
    CbProgram cb = cb_upper_program(phi);
    SdpSolution sol = solve_sdp(cb.prob);
    require_solved(sol, "completely bounded norm");
    double ub = sol.y[static_cast<std::size_t>(cb.var_t)];
    double lb = cb_lower_bound(phi, ub);
    if (ub - lb > 1e-4 * std::max(1.0, ub))
        throw BoundMismatch("completely bounded norm: sampled lower bound " +
                            std::to_string(lb) + " vs certificate " + std::to_string(ub));
    return ub;
}

double norm_r(const OperatorSystem& s, const LevelElement& x) {
    if (!same_system(x.system, s))
        throw DomainMismatch("element does not belong to the given system");
    if (hs_norm(x.matrix) < 1e-14) return 0.0;
    const int n = x.level;
    const int k = s.ambient_dim;
    const int dim = 2 * n * k;
    CMatrix xh = CMatrix::Zero(dim, dim);
    xh.block(0, n * k, n * k, n * k) = x.matrix;
    xh.block(n * k, 0, n * k, n * k) = x.matrix.adjoint();

    const std::vector<CMatrix>& span = cone_span_basis(s, 2 * n);
    const int m = static_cast<int>(span.size());
    CMatrix v1 = face_isometry(s);
    CMatrix v = kron(CMatrix::Identity(2 * n, 2 * n), v1);

    SdpProblem prob;
    prob.num_vars = m + 1;
    prob.c.assign(static_cast<std::size_t>(m) + 1, 0.0);
    prob.c.back() = 1.0;

    SdpBlock plus;  // t I - (xh + c) >= 0
    plus.dim = dim;
    plus.F.resize(static_cast<std::size_t>(m) + 2);
    plus.F[0] = -xh;
    SdpBlock minus;  // t I + (xh + c) >= 0
    minus.dim = dim;
    minus.F.resize(static_cast<std::size_t>(m) + 2);
    minus.F[0] = xh;
    for (int i = 0; i < m; ++i) {
        plus.F[static_cast<std::size_t>(i) + 1] = -span[static_cast<std::size_t>(i)];
        minus.F[static_cast<std::size_t>(i) + 1] = span[static_cast<std::size_t>(i)];
    }
    plus.F[static_cast<std::size_t>(m) + 1] = CMatrix::Identity(dim, dim);
    minus.F[static_cast<std::size_t>(m) + 1] = CMatrix::Identity(dim, dim);
    prob.blocks.push_back(std::move(plus));
    prob.blocks.push_back(std::move(minus));

    if (m > 0) {
        SdpBlock face;  // compressed cone membership of c
        face.dim = static_cast<int>(v.cols());
        face.F.resize(static_cast<std::size_t>(m) + 2);
        face.F[0] = CMatrix::Zero(face.dim, face.dim);
        for (int i = 0; i < m; ++i)
            face.F[static_cast<std::size_t>(i) + 1] =
                v.adjoint() * span[static_cast<std::size_t>(i)] * v;
        face.F[static_cast<std::size_t>(m) + 1] = CMatrix::Zero(face.dim, face.dim);
        prob.blocks.push_back(std::move(face));
    }

    SdpSolution sol = solve_sdp(prob);
    require_solved(sol, "regularization norm");
    return std::max(0.0, sol.y.back());
}

namespace {

double gamma_primal(const OperatorSystem& s, const LevelElement& x, CMatrix* b_opt) {
    const int n = x.level;
    const int k = s.ambient_dim;
    std::vector<CMatrix> herm = full_hermitian_basis(n);
    const int m = static_cast<int>(herm.size());
    CMatrix idk = CMatrix::Identity(k, k);

    SdpProblem prob;
    prob.num_vars = m;
    prob.c.resize(static_cast<std::size_t>(m));
    SdpBlock upper;  // B (x) I - x >= 0
    upper.dim = n * k;
    upper.F.resize(static_cast<std::size_t>(m) + 1);
    upper.F[0] = -x.matrix;
    SdpBlock lower;  // B (x) I + x >= 0
    lower.dim = n * k;
    lower.F.resize(static_cast<std::size_t>(m) + 1);
    lower.F[0] = x.matrix;
    for (int i = 0; i < m; ++i) {
        prob.c[static_cast<std::size_t>(i)] = herm[static_cast<std::size_t>(i)].trace().real();
        CMatrix big = kron(herm[static_cast<std::size_t>(i)], idk);
        upper.F[static_cast<std::size_t>(i) + 1] = big;
        lower.F[static_cast<std::size_t>(i) + 1] = big;
    }
    prob.blocks.push_back(std::move(upper));
    prob.blocks.push_back(std::move(lower));

    SdpSolution sol = solve_sdp(prob);
    require_solved(sol, "factorization gauge");
    if (b_opt) {
        *b_opt = CMatrix::Zero(n, n);
        for (int i = 0; i < m; ++i)
            *b_opt += sol.y[static_cast<std::size_t>(i)] * herm[static_cast<std::size_t>(i)];
    }
    return sol.objective;
}

// sup F(x) over self-adjoint functionals whose transported map has cb norm
// at most one (the factorization certificate encodes the ball).
double gamma_dual_value(const OperatorSystem& s, const LevelElement& x) {
    const int n = x.level;
    const int k = s.ambient_dim;
    const int kn = k * n;
    const std::vector<CMatrix>& fun = level_sa_basis(s, n);
    std::vector<CMatrix> herm = full_hermitian_basis(kn);
    std::vector<CMatrix> dirs = extension_choi_dirs(s.space, n);

    std::vector<CMatrix> jdir;  // Choi of theta of each functional direction
    jdir.reserve(fun.size());
    for (const CMatrix& g : fun) {
        LevelFunctional f{s, n, g, std::nullopt, std::nullopt};
        jdir.push_back(choi_zero_extension(theta_of_functional(f)));
    }

    const int nf = static_cast<int>(fun.size());
    const int nj = static_cast<int>(herm.size());
    const int nz = 2 * static_cast<int>(dirs.size());
    SdpProblem prob;
    prob.num_vars = nf + 2 * nj + nz;
    prob.c.assign(static_cast<std::size_t>(prob.num_vars), 0.0);

    SdpBlock b1;
    b1.dim = 2 * kn;
    b1.F.assign(static_cast<std::size_t>(prob.num_vars) + 1, CMatrix());
    b1.F[0] = CMatrix::Zero(2 * kn, 2 * kn);
    SdpBlock b2;
    b2.dim = n;
    b2.F.assign(static_cast<std::size_t>(prob.num_vars) + 1, CMatrix());
    b2.F[0] = CMatrix::Identity(n, n);  // I - Tr_k J1 >= 0
    SdpBlock b3 = b2;

    for (int i = 0; i < nf; ++i) {
        prob.c[static_cast<std::size_t>(i)] =
            -hs_inner(x.matrix, fun[static_cast<std::size_t>(i)]).real();
        CMatrix f = CMatrix::Zero(2 * kn, 2 * kn);
        f.block(0, kn, kn, kn) = jdir[static_cast<std::size_t>(i)];
        f.block(kn, 0, kn, kn) = jdir[static_cast<std::size_t>(i)].adjoint();
        b1.F[static_cast<std::size_t>(i) + 1] = f;
    }
    for (int sidx = 0; sidx < nj; ++sidx) {
        CMatrix m1 = CMatrix::Zero(2 * kn, 2 * kn);
        m1.block(0, 0, kn, kn) = herm[static_cast<std::size_t>(sidx)];
        b1.F[static_cast<std::size_t>(nf + sidx) + 1] = m1;
        b2.F[static_cast<std::size_t>(nf + sidx) + 1] =
            -ptrace_first(herm[static_cast<std::size_t>(sidx)], k, n);
        CMatrix m2 = CMatrix::Zero(2 * kn, 2 * kn);
        m2.block(kn, kn, kn, kn) = herm[static_cast<std::size_t>(sidx)];
        b1.F[static_cast<std::size_t>(nf + nj + sidx) + 1] = m2;
        b3.F[static_cast<std::size_t>(nf + nj + sidx) + 1] =
            -ptrace_first(herm[static_cast<std::size_t>(sidx)], k, n);
    }
    for (int r = 0; r < static_cast<int>(dirs.size()); ++r) {
        const CMatrix& c = dirs[static_cast<std::size_t>(r)];
        CMatrix mre = CMatrix::Zero(2 * kn, 2 * kn);
        mre.block(0, kn, kn, kn) = c;
        mre.block(kn, 0, kn, kn) = c.adjoint();
        b1.F[static_cast<std::size_t>(nf + 2 * nj + 2 * r) + 1] = mre;
        CMatrix ci = Complex(0, 1) * c;
        CMatrix mim = CMatrix::Zero(2 * kn, 2 * kn);
        mim.block(0, kn, kn, kn) = ci;
        mim.block(kn, 0, kn, kn) = ci.adjoint();
        b1.F[static_cast<std::size_t>(nf + 2 * nj + 2 * r) + 2] = mim;
    }
    for (auto* blk : {&b1, &b2, &b3})
        for (auto& f : blk->F)
            if (f.size() == 0) f = CMatrix::Zero(blk->dim, blk->dim);
    prob.blocks.push_back(std::move(b1));
    prob.blocks.push_back(std::move(b2));
    prob.blocks.push_back(std::move(b3));

    SdpSolution sol = solve_sdp(prob);
    require_solved(sol, "factorization gauge (dual)");
    return -sol.objective;
}

}  // namespace

double gamma_norm(const OperatorSystem& s, const LevelElement& x) {
    if (!same_system(x.system, s))
        throw DomainMismatch("element does not belong to the given system");
    if (!x.is_selfadjoint(1e-9))
        throw NonHermitianInput("the gauge is defined for self-adjoint elements");
    if (hs_norm(x.matrix) < 1e-14) return 0.0;
    double primal = gamma_primal(s, x, nullptr);
    double dual = gamma_dual_value(s, x);
    if (std::abs(primal - dual) > 1e-4 * std::max(1.0, primal))
        throw BoundMismatch("factorization gauge: primal " + std::to_string(primal) +
                            " vs dual " + std::to_string(dual));
    return primal;
}

double gamma_dual_norm(const LevelFunctional& f) {
    if (!is_selfadjoint_functional(f, 1e-8))
        throw NonHermitianInput("dual gauge norm needs a self-adjoint functional");
    const OperatorSystem& s = f.system;
    const int n = f.level;
    const int k = s.ambient_dim;
    const std::vector<CMatrix>& sa = level_sa_basis(s, n);
    std::vector<CMatrix> herm = full_hermitian_basis(n);
    const int nx = static_cast<int>(sa.size());
    const int nb = static_cast<int>(herm.size());
    CMatrix idk = CMatrix::Identity(k, k);

    SdpProblem prob;
    prob.num_vars = nx + nb;
    prob.c.assign(static_cast<std::size_t>(prob.num_vars), 0.0);
    SdpBlock upper, lower, trace;
    upper.dim = n * k;
    lower.dim = n * k;
    trace.dim = 1;
    upper.F.assign(static_cast<std::size_t>(prob.num_vars) + 1,
                   CMatrix::Zero(n * k, n * k));
    lower.F = upper.F;
    trace.F.assign(static_cast<std::size_t>(prob.num_vars) + 1, CMatrix::Zero(1, 1));
    trace.F[0](0, 0) = 1.0;  // 1 - Tr B >= 0
    for (int i = 0; i < nx; ++i) {
        prob.c[static_cast<std::size_t>(i)] = -eval(f, sa[static_cast<std::size_t>(i)]).real();
        upper.F[static_cast<std::size_t>(i) + 1] = -sa[static_cast<std::size_t>(i)];
        lower.F[static_cast<std::size_t>(i) + 1] = sa[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < nb; ++i) {
        CMatrix big = kron(herm[static_cast<std::size_t>(i)], idk);
        upper.F[static_cast<std::size_t>(nx + i) + 1] = big;
        lower.F[static_cast<std::size_t>(nx + i) + 1] = big;
        trace.F[static_cast<std::size_t>(nx + i) + 1](0, 0) =
            -herm[static_cast<std::size_t>(i)].trace().real();
    }
    prob.blocks.push_back(std::move(upper));
    prob.blocks.push_back(std::move(lower));
    prob.blocks.push_back(std::move(trace));

    SdpSolution sol = solve_sdp(prob);
    require_solved(sol, "dual gauge norm");
    return std::max(0.0, -sol.objective);
}

SeparationReport separate_from_cone(const OperatorSystem& s, const LevelElement& v0,
                                    double feas_tol) {
    if (!same_system(v0.system, s))
        throw DomainMismatch("element does not belong to the given system");
    if (!v0.is_selfadjoint(1e-9))
        throw NonHermitianInput("separation needs a self-adjoint element");
    ConeResult cr = cone_membership(s, v0, feas_tol);
    if (cr.in_cone)
        throw SeparationFailed("element is inside the cone within tolerance");

    const int dim = static_cast<int>(v0.matrix.rows());
    ConicProgram prog;
    prog.block_dims = {dim};
    prog.objective = {v0.matrix};
    ConicConstraint tr;
    ConicTerm term;
    term.block = 0;
    term.mat = CMatrix::Identity(dim, dim);
    fill_term_support(term);
    tr.terms.push_back(std::move(term));
    tr.rhs = 1.0;
    prog.constraints.push_back(std::move(tr));

    ConicSolution sol = solve_conic(prog);
    require_solved(sol, "cone separation");
    SeparationReport rep;
    rep.sigma = hermitian_part_of(sol.X[0]);
    rep.delta = -sol.objective;
    if (rep.delta <= feas_tol)
        throw SeparationFailed("separation margin below tolerance");
    rep.functional = LevelFunctional{s, v0.level, project_level(s, v0.level, rep.sigma),
                                     rep.sigma, rep.sigma};
    return rep;
}

MatrixConvexSet sampled_matrix_cone(const OperatorSystem& s, int max_level, int per_level,
                                    std::uint64_t seed) {
    MatrixConvexSet set;
    set.system = s;
    set.max_level = max_level;
    set.cone = true;
    Rng rng(seed);
    set.samples.resize(static_cast<std::size_t>(max_level));
    for (int m = 1; m <= max_level; ++m) {
        auto& list = set.samples[static_cast<std::size_t>(m - 1)];
        list.push_back(CMatrix::Zero(m * s.ambient_dim, m * s.ambient_dim));
        for (int i = 0; i < per_level; ++i)
            list.push_back(random_cone_element(s, m, rng).matrix);
    }
    return set;
}

MatrixConvexSet sampled_unit_balls(const OperatorSystem& s, int max_level, int per_level,
                                   std::uint64_t seed) {
    MatrixConvexSet set;
    set.system = s;
    set.max_level = max_level;
    set.cone = false;
    Rng rng(seed);
    set.samples.resize(static_cast<std::size_t>(max_level));
    for (int m = 1; m <= max_level; ++m) {
        auto& list = set.samples[static_cast<std::size_t>(m - 1)];
        list.push_back(CMatrix::Zero(m * s.ambient_dim, m * s.ambient_dim));
        for (int i = 0; i < per_level; ++i) {
            CMatrix x = random_sa_element(s, m, rng).matrix;
            double nrm = op_norm(x);
            if (nrm < 1e-12) continue;
            double scale = (i % 2 == 0) ? 1.0 : rng.uniform(0.2, 1.0);
            list.push_back(x * (scale / nrm));
        }
    }
    return set;
}

std::optional<SystemMap> effros_winkler_separate(const MatrixConvexSet& K,
                                                 const LevelElement& v0) {
    const OperatorSystem& s = K.system;
    const int n = v0.level;
    const int k = s.ambient_dim;
    if (!same_system(v0.system, s))
        throw DomainMismatch("element does not belong to the set's system");

    // Constraints for the scalar functional live at level n: compress samples.
    Rng rng(2027);
    std::vector<CMatrix> cons;
    for (int m = 1; m <= K.max_level; ++m) {
        if (m > static_cast<int>(K.samples.size())) break;
        for (const CMatrix& w : K.samples[static_cast<std::size_t>(m - 1)]) {
            if (m == n) cons.push_back(w);
            for (int r = 0; r < 3; ++r) {
                CMatrix alpha = rng.complex_matrix(m, n);
                double nrm = op_norm(alpha);
                if (nrm > 1.0) alpha /= nrm;
                CMatrix a = kron(alpha, CMatrix::Identity(k, k));
                cons.push_back(a.adjoint() * w * a);
            }
        }
    }

    const std::vector<CMatrix>& basis = level_sa_basis(s, n);
    const int nf = static_cast<int>(basis.size());
    SdpProblem fs;
    fs.num_vars = nf;
    fs.c.resize(static_cast<std::size_t>(nf));
    for (int i = 0; i < nf; ++i)
        fs.c[static_cast<std::size_t>(i)] =
            -hs_inner(v0.matrix, basis[static_cast<std::size_t>(i)]).real();
    auto one_by_one = [&](double f0, const std::vector<double>& coeffs) {
        SdpBlock b;
        b.dim = 1;
        b.F.assign(static_cast<std::size_t>(nf) + 1, CMatrix::Zero(1, 1));
        b.F[0](0, 0) = f0;
        for (int i = 0; i < nf; ++i) b.F[static_cast<std::size_t>(i) + 1](0, 0) = coeffs[static_cast<std::size_t>(i)];
        fs.blocks.push_back(std::move(b));
    };
    for (const CMatrix& c : cons) {
        std::vector<double> coeffs(static_cast<std::size_t>(nf));
        for (int i = 0; i < nf; ++i)
            coeffs[static_cast<std::size_t>(i)] =
                -hs_inner(c, basis[static_cast<std::size_t>(i)]).real();
        one_by_one(K.cone ? 0.0 : 1.0, coeffs);
    }
    for (int i = 0; i < nf; ++i) {  // box |f_i| <= 1
        std::vector<double> plus(static_cast<std::size_t>(nf), 0.0),
            minus(static_cast<std::size_t>(nf), 0.0);
        plus[static_cast<std::size_t>(i)] = 1.0;
        minus[static_cast<std::size_t>(i)] = -1.0;
        one_by_one(1.0, plus);
        one_by_one(1.0, minus);
    }
    SdpSolution fsol = solve_sdp(fs);
    if (fsol.status != SdpStatus::Optimal) return std::nullopt;
    double fv0 = -fsol.objective;
    if (K.cone ? (fv0 <= 1e-7) : (fv0 <= 1.0 + 1e-7)) return std::nullopt;

    CMatrix rep = CMatrix::Zero(n * k, n * k);
    for (int i = 0; i < nf; ++i)
        rep += fsol.y[static_cast<std::size_t>(i)] * basis[static_cast<std::size_t>(i)];
    if (K.cone) rep *= 2.0 / fv0;  // normalize the violation to F(v0) = 2
    LevelFunctional f{s, n, rep, std::nullopt, std::nullopt};
    SystemMap theta = theta_of_functional(f);

    // Scalar metric dominating the transported map on all stored samples:
    // minimize Tr G with Re Theta^(m)(w) <= I_m (x) G^T and G >= 0.
    std::vector<CMatrix> herm = full_hermitian_basis(n);
    const int ng = static_cast<int>(herm.size());
    SdpProblem gs;
    gs.num_vars = ng;
    gs.c.resize(static_cast<std::size_t>(ng));
    for (int i = 0; i < ng; ++i)
        gs.c[static_cast<std::size_t>(i)] = herm[static_cast<std::size_t>(i)].trace().real();
    for (int m = 1; m <= K.max_level; ++m) {
        if (m > static_cast<int>(K.samples.size())) break;
        for (const CMatrix& w : K.samples[static_cast<std::size_t>(m - 1)]) {
            SdpBlock b;
            b.dim = m * n;
            b.F.resize(static_cast<std::size_t>(ng) + 1);
            b.F[0] = -hermitian_part_of(amplify_matrix(theta, m, w));
            for (int i = 0; i < ng; ++i)
                b.F[static_cast<std::size_t>(i) + 1] =
                    kron(CMatrix::Identity(m, m),
                         CMatrix(herm[static_cast<std::size_t>(i)].transpose()));
            gs.blocks.push_back(std::move(b));
        }
    }
    {
        SdpBlock pos;
        pos.dim = n;
        pos.F.resize(static_cast<std::size_t>(ng) + 1);
        pos.F[0] = CMatrix::Zero(n, n);
        for (int i = 0; i < ng; ++i)
            pos.F[static_cast<std::size_t>(i) + 1] = herm[static_cast<std::size_t>(i)];
        gs.blocks.push_back(std::move(pos));
    }
    SdpSolution gsol = solve_sdp(gs);
    if (gsol.status != SdpStatus::Optimal) return std::nullopt;
    CMatrix g = CMatrix::Zero(n, n);
    for (int i = 0; i < ng; ++i)
        g += gsol.y[static_cast<std::size_t>(i)] * herm[static_cast<std::size_t>(i)];
    double eps = std::max(1e-8, 1e-6 * std::max(1.0, g.trace().real()));
    CMatrix gt = g.transpose();
    CMatrix d = psd_inv_sqrt(hermitian_part_of(gt) + eps * CMatrix::Identity(n, n));

    SystemMap psi = map_from_action(s, theta.codomain, [&](const CMatrix& x) {
        return CMatrix(d * opsys::map_apply(theta, x) * d);
    });

    // Re-verify the certificates before returning.
    for (int m = 1; m <= K.max_level; ++m) {
        if (m > static_cast<int>(K.samples.size())) break;
        for (const CMatrix& w : K.samples[static_cast<std::size_t>(m - 1)]) {
            CMatrix img = hermitian_part_of(amplify_matrix(psi, m, w));
            if (lambda_max(img) > 1.0 + 1e-7) return std::nullopt;
        }
    }
    CMatrix img0 = hermitian_part_of(amplify_matrix(psi, n, v0.matrix));
    if (lambda_max(img0) <= 1.0 + 1e-9) return std::nullopt;
    return psi;
}

}  // namespace opsys
