#include "opsys/system.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace opsys {

namespace {

constexpr double kRankTol = 1e-7;  // eigenvalue threshold for support rank

CMatrix block_of(const CMatrix& m, int i, int j, int k) { return m.block(i * k, j * k, k, k); }

// inf{t >= 0 : t D + X0 psd} for psd D, self-adjoint X0; +inf when X0 is not
// supported inside supp(D). Eigenvalue bisection, no SDP.
double feas_inf(const CMatrix& D, const CMatrix& X0) {
    const double xn = op_norm(X0);
    const double scale = std::max({1.0, xn, op_norm(D)});
    auto feasible = [&](double t) {
        return lambda_min(t * D + X0) >= -1e-11 * std::max(scale, t * scale);
    };
    if (feasible(0.0)) return 0.0;
    EigResult ed = hermitian_eig(hermitian_part(D));
    double dmax = ed.values.maxCoeff();
    double lpos = 0.0;
    for (int i = 0; i < ed.values.size(); ++i)
        if (ed.values(i) > 1e-10 * std::max(1.0, dmax)) {
            lpos = ed.values(i);
            break;
        }
    if (lpos <= 0.0) return std::numeric_limits<double>::infinity();
    double hi = 2.0 * xn / lpos + 1e-12;
    if (!feasible(hi)) return std::numeric_limits<double>::infinity();
    double lo = 0.0;
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        (feasible(mid) ? hi : lo) = mid;
    }
    return hi;
}

SdpSolution solve_or_throw(const SdpProblem& p, const std::string& what,
                           const SolveOptions& opts = {}) {
    SdpSolution s = solve_sdp(p, opts);
    if (s.status != SdpStatus::Optimal)
        throw ConvergenceFailure(what + ": solver returned " + to_string(s.status) +
                                 (s.message.empty() ? "" : " (" + s.message + ")"));
    return s;
}

CMatrix assemble(const std::vector<CMatrix>& basis, const std::vector<double>& y, int upto) {
    CMatrix m = CMatrix::Zero(basis[0].rows(), basis[0].cols());
    for (int t = 0; t < upto; ++t) m += y[t] * basis[t];
    return m;
}

}  // namespace

OperatorSystem make_system(const std::vector<CMatrix>& spanning) {
    if (spanning.empty()) throw EmptySpan("make_system: no spanning matrices");
    const int k = static_cast<int>(spanning[0].rows());
    std::vector<CMatrix> gens;
    for (const auto& g : spanning) {
        if (g.rows() != k || g.cols() != k)
            throw DimensionMismatch("make_system: spanning matrices must be square of one size");
        gens.push_back(g);
        gens.push_back(g.adjoint());
    }
    OperatorSystem S;
    S.ambient_dim = k;
    S.space = subspace_from_spanning(k, gens);
    if (S.space.dim() == 0) throw EmptySpan("make_system: span is zero");
    S.sa_basis = selfadjoint_basis(S.space);
    return S;
}

LevelElement make_level_element(const OperatorSystem& S, int level, const CMatrix& m,
                                double tol) {
    const int k = S.ambient_dim;
    if (level < 1) throw LevelMismatch("make_level_element: level must be >= 1");
    if (m.rows() != level * k || m.cols() != level * k)
        throw DimensionMismatch("make_level_element: matrix size does not match level");
    LevelElement x;
    x.system = S;
    x.level = level;
    x.matrix = m;
    x.coeffs.resize(level * level);
    CMatrix rec = CMatrix::Zero(m.rows(), m.cols());
    for (int i = 0; i < level; ++i)
        for (int j = 0; j < level; ++j) {
            CMatrix blk = block_of(m, i, j, k);
            CMatrix proj = S.space.project(blk);
            x.coeffs[i * level + j] = S.space.coefficients(proj);
            rec.block(i * k, j * k, k, k) = proj;
        }
    if ((rec - m).norm() > tol * std::max(1.0, m.norm()))
        throw NotInSystem("make_level_element: matrix has blocks outside the system");
    x.matrix = rec;
    return x;
}

LevelElement zero_pad(const LevelElement& x, int new_level) {
    if (new_level < x.level) throw LevelMismatch("zero_pad: target level below current");
    const int k = x.system.ambient_dim;
    CMatrix m = CMatrix::Zero(new_level * k, new_level * k);
    m.topLeftCorner(x.level * k, x.level * k) = x.matrix;
    return make_level_element(x.system, new_level, m);
}

const std::vector<CMatrix>& level_sa_basis(const OperatorSystem& S, int level) {
    auto& cache = *S.cache;
    std::lock_guard<std::mutex> lock(cache.mu);
    auto it = cache.level_sa.find(level);
    if (it != cache.level_sa.end()) return it->second;

    std::vector<CMatrix> out;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int p = 0; p < level; ++p)
        for (int q = p; q < level; ++q) {
            CMatrix epq = CMatrix::Zero(level, level);
            epq(p, q) = 1.0;
            if (p == q) {
                for (const auto& h : S.sa_basis) out.push_back(kron(epq, h));
            } else {
                CMatrix eqp = epq.adjoint();
                for (const auto& h : S.sa_basis) {
                    out.push_back(inv_sqrt2 * (kron(epq, h) + kron(eqp, h)));
                    out.push_back(inv_sqrt2 *
                                  (kron(epq, Complex(0, 1) * h) - kron(eqp, Complex(0, 1) * h)));
                }
            }
        }
    return cache.level_sa.emplace(level, std::move(out)).first->second;
}

const std::vector<CMatrix>& level_pinning_basis(const OperatorSystem& S, int level) {
    // Compute the sa basis first; both acquire the cache lock.
    const auto& sa = level_sa_basis(S, level);
    auto& cache = *S.cache;
    std::lock_guard<std::mutex> lock(cache.mu);
    auto it = cache.level_pin.find(level);
    if (it != cache.level_pin.end()) return it->second;
    auto pin = hermitian_complement_basis(level * S.ambient_dim, sa);
    return cache.level_pin.emplace(level, std::move(pin)).first->second;
}

const std::vector<CMatrix>& cone_span_basis(const OperatorSystem& S, int level) {
    const CMatrix P = max_rank_positive(S).P;
    const auto& sa = level_sa_basis(S, level);
    auto& cache = *S.cache;
    std::lock_guard<std::mutex> lock(cache.mu);
    auto it = cache.cone_span.find(level);
    if (it != cache.cone_span.end()) return it->second;

    const int nk = level * S.ambient_dim;
    CMatrix Q = kron(CMatrix::Identity(level, level), P);
    auto full = full_hermitian_basis(nk);
    const int t_dim = static_cast<int>(sa.size());
    Eigen::MatrixXd A(static_cast<int>(full.size()), t_dim);
    for (int t = 0; t < t_dim; ++t) {
        CMatrix r = sa[t] - Q * sa[t] * Q;
        for (size_t b = 0; b < full.size(); ++b)
            A(static_cast<int>(b), t) = hs_inner(full[b], r).real();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    int rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > 1e-10 * std::max(1.0, smax)) ++rank;
    std::vector<CMatrix> span;
    for (int j = rank; j < t_dim; ++j) {
        CMatrix w = CMatrix::Zero(nk, nk);
        for (int t = 0; t < t_dim; ++t) w += svd.matrixV()(t, j) * sa[t];
        span.push_back(hermitian_part(w));
    }
    return cache.cone_span.emplace(level, std::move(span)).first->second;
}

LevelElement random_sa_element(const OperatorSystem& S, int level, Rng& rng) {
    const auto& basis = level_sa_basis(S, level);
    CMatrix m = CMatrix::Zero(level * S.ambient_dim, level * S.ambient_dim);
    for (const auto& b : basis) m += rng.gaussian() * b;
    return make_level_element(S, level, hermitian_part(m));
}

LevelElement random_element(const OperatorSystem& S, int level, Rng& rng) {
    const int k = S.ambient_dim;
    CMatrix m = CMatrix::Zero(level * k, level * k);
    for (int i = 0; i < level; ++i)
        for (int j = 0; j < level; ++j) {
            CMatrix blk = CMatrix::Zero(k, k);
            for (const auto& b : S.space.basis) blk += rng.cgaussian() * b;
            m.block(i * k, j * k, k, k) = blk;
        }
    return make_level_element(S, level, m);
}

LevelElement random_cone_element(const OperatorSystem& S, int level, Rng& rng) {
    const FacialData& fd = max_rank_positive(S);
    const int nk = level * S.ambient_dim;
    if (fd.rank == 0)
        return make_level_element(S, level, CMatrix::Zero(nk, nk));
    const auto& span = cone_span_basis(S, level);
    CMatrix v = CMatrix::Zero(nk, nk);
    for (const auto& b : span) v += rng.gaussian() * b;
    v = hermitian_part(v);
    CMatrix D = kron(CMatrix::Identity(level, level), fd.u_star);
    double t0 = feas_inf(D, v);
    if (!std::isfinite(t0))
        throw ConvergenceFailure("random_cone_element: pinned sample escaped the support");
    CMatrix u = (1.25 * t0 + 0.1) * D + v;
    return make_level_element(S, level, hermitian_part(u));
}

ConeResult cone_membership(const OperatorSystem& S, const LevelElement& x, double feas_tol) {
    if (!same_system(S, x.system)) throw LevelMismatch("cone_membership: foreign element");
    if (!is_hermitian(x.matrix, 1e-10))
        throw NonHermitianInput("cone_membership: element is not self-adjoint");
    ConeResult r;
    EigResult e = hermitian_eig(hermitian_part(x.matrix));
    r.min_eig = e.values.minCoeff();
    double scale = std::max(1.0, std::abs(e.values.maxCoeff()));
    if (r.min_eig >= -feas_tol * scale) {
        r.in_cone = true;
        return r;
    }
    const int n = static_cast<int>(e.values.size());
    CMatrix proj = CMatrix::Zero(n, n);
    int cnt = 0;
    for (int i = 0; i < n; ++i)
        if (e.values(i) < -feas_tol * scale) {
            proj += e.vectors.col(i) * e.vectors.col(i).adjoint();
            ++cnt;
        }
    r.certificate = proj / static_cast<double>(cnt);
    return r;
}

const FacialData& max_rank_positive(const OperatorSystem& S) {
    {
        std::lock_guard<std::mutex> lock(S.cache->mu);
        if (S.cache->facial) return *S.cache->facial;
    }
    const int k = S.ambient_dim;
    const int d = S.sa_dim();
    const CMatrix I = CMatrix::Identity(k, k);

    // maximize <W, u> over u in S_sa with 0 <= u <= I.
    auto solve_weighted = [&](const CMatrix& W) {
        SdpProblem p;
        p.num_vars = d;
        p.c.resize(d);
        for (int t = 0; t < d; ++t) p.c[t] = -hs_inner(W, S.sa_basis[t]).real();
        SdpBlock pos, cap;
        pos.dim = k;
        cap.dim = k;
        pos.F.push_back(CMatrix::Zero(k, k));
        cap.F.push_back(I);
        for (int t = 0; t < d; ++t) {
            pos.F.push_back(S.sa_basis[t]);
            cap.F.push_back(-S.sa_basis[t]);
        }
        p.blocks = {pos, cap};
        SdpSolution s = solve_or_throw(p, "max_rank_positive");
        return std::pair<CMatrix, double>(assemble(S.sa_basis, s.y, d), -s.objective);
    };

    auto support_of = [&](const CMatrix& u, int* rank_out) {
        EigResult e = hermitian_eig(hermitian_part(u));
        CMatrix P = CMatrix::Zero(k, k);
        int rank = 0;
        for (int i = 0; i < k; ++i)
            if (e.values(i) > kRankTol) {
                P += e.vectors.col(i) * e.vectors.col(i).adjoint();
                ++rank;
            }
        if (rank_out) *rank_out = rank;
        return P;
    };

    FacialData fd;
    auto [u_acc, val] = solve_weighted(I);
    if (val <= kRankTol) {
        fd.u_star = CMatrix::Zero(k, k);
        fd.P = CMatrix::Zero(k, k);
        fd.rank = 0;
    } else {
        fd.P = support_of(u_acc, &fd.rank);
        // Grow the support until no cone mass remains outside it; each round
        // strictly increases the rank, so this ends within k rounds.
        for (int round = 0; round < k; ++round) {
            auto [u_new, gain] = solve_weighted(I - fd.P);
            if (gain <= 1e-9) break;
            u_acc = hermitian_part(u_acc + u_new);
            fd.P = support_of(u_acc, &fd.rank);
        }
        fd.u_star = u_acc;
    }
    std::lock_guard<std::mutex> lock(S.cache->mu);
    if (!S.cache->facial) S.cache->facial = std::move(fd);
    return *S.cache->facial;
}

GeneratingReport is_generating(const OperatorSystem& S) {
    const FacialData& fd = max_rank_positive(S);
    GeneratingReport rep;
    rep.generating = true;
    for (const auto& b : S.sa_basis) {
        if ((fd.P * b * fd.P - b).norm() > 1e-8 * std::max(1.0, b.norm())) {
            rep.generating = false;
            rep.witness = b;
            break;
        }
    }
    return rep;
}

std::optional<LevelElement> find_order_unit(const OperatorSystem& S) {
    {
        std::lock_guard<std::mutex> lock(S.cache->mu);
        if (S.cache->order_unit_done) {
            if (!S.cache->order_unit) return std::nullopt;
            return make_level_element(S, 1, *S.cache->order_unit);
        }
    }
    const int k = S.ambient_dim;
    const int d = S.sa_dim();
    // maximize t s.t. e - tI >= 0, I - e >= 0, e in S_sa.
    SdpProblem p;
    p.num_vars = d + 1;
    p.c.assign(d + 1, 0.0);
    p.c[d] = -1.0;
    SdpBlock lower, upper;
    lower.dim = k;
    upper.dim = k;
    lower.F.push_back(CMatrix::Zero(k, k));
    upper.F.push_back(CMatrix::Identity(k, k));
    for (int t = 0; t < d; ++t) {
        lower.F.push_back(S.sa_basis[t]);
        upper.F.push_back(-S.sa_basis[t]);
    }
    lower.F.push_back(-CMatrix::Identity(k, k));
    upper.F.push_back(CMatrix::Zero(k, k));
    p.blocks = {lower, upper};
    SdpSolution s = solve_or_throw(p, "find_order_unit");
    double margin = -s.objective;
    std::lock_guard<std::mutex> lock(S.cache->mu);
    if (!S.cache->order_unit_done) {
        S.cache->order_unit_done = true;
        S.cache->order_unit_margin = margin;
        if (margin > 1e-8) S.cache->order_unit = assemble(S.sa_basis, s.y, d);
    }
    if (!S.cache->order_unit) return std::nullopt;
    return make_level_element(S, 1, *S.cache->order_unit);
}

double order_unit_margin(const OperatorSystem& S) {
    find_order_unit(S);
    std::lock_guard<std::mutex> lock(S.cache->mu);
    return S.cache->order_unit ? S.cache->order_unit_margin : 0.0;
}

OrderUnitNet make_net(const OperatorSystem& S, const std::vector<CMatrix>& elements,
                      double feas_tol) {
    OrderUnitNet net;
    CMatrix prev = CMatrix::Zero(S.ambient_dim, S.ambient_dim);
    for (const auto& a : elements) {
        if (!S.contains(a)) throw NotInSystem("make_net: element outside the system");
        if (!is_hermitian(a, 1e-10)) throw NonHermitianInput("make_net: element not self-adjoint");
        if (lambda_min(a) < -feas_tol)
            throw NetNotIncreasing("make_net: element is not positive");
        if (lambda_min(hermitian_part(a - prev)) < -feas_tol)
            throw NetNotIncreasing("make_net: consecutive difference is not positive");
        net.elements.push_back(a);
        prev = a;
    }
    return net;
}

namespace {

// Value of the net norm at a single net element.
double net_value(const OperatorSystem& S, const CMatrix& a, const LevelElement& x) {
    const int n = x.level;
    const int nk = n * S.ambient_dim;
    CMatrix D = kron(CMatrix::Identity(2 * n, 2 * n), a);
    CMatrix X0 = CMatrix::Zero(2 * nk, 2 * nk);
    X0.topRightCorner(nk, nk) = x.matrix;
    X0.bottomLeftCorner(nk, nk) = x.matrix.adjoint();
    double bis = feas_inf(D, X0);
    double lmin = lambda_min(a);
    double scale = std::max(1.0, op_norm(a));
    if (lmin > 1e-10 * scale) {
        CMatrix Ai = psd_inv_sqrt(kron(CMatrix::Identity(n, n), a));
        double closed = op_norm(Ai * x.matrix * Ai);
        if (std::abs(closed - bis) > 1e-6 * std::max(1.0, closed))
            throw ConvergenceFailure("norm_a: closed form and bisection disagree");
        return closed;
    }
    return bis;
}

}  // namespace

double norm_a(const OperatorSystem& S, const OrderUnitNet& net, const LevelElement& x) {
    if (net.elements.empty()) throw EmptySpan("norm_a: empty net");
    if (!same_system(S, x.system)) throw LevelMismatch("norm_a: foreign element");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : net.elements) best = std::min(best, net_value(S, a, x));
    return best;
}

double norm_a_weak(const OperatorSystem& S, const OrderUnitNet& net, const LevelElement& x) {
    if (net.elements.empty()) throw EmptySpan("norm_a_weak: empty net");
    if (!same_system(S, x.system)) throw LevelMismatch("norm_a_weak: foreign element");
    return net_value(S, net.elements.back(), x);
}

WeakNormReport is_weakly_norm_defining(const OperatorSystem& S, const OrderUnitNet& net,
                                       int samples, int max_level, std::uint64_t seed) {
    WeakNormReport rep;
    Rng rng(seed);
    for (int s = 0; s < samples; ++s) {
        int level = 1 + s % max_level;
        LevelElement x = random_element(S, level, rng);
        double ref = op_norm(x.matrix);
        double weak = norm_a_weak(S, net, x);
        double dev = std::isfinite(weak) ? std::abs(ref - weak)
                                         : std::numeric_limits<double>::infinity();
        rep.max_deviation = std::max(rep.max_deviation, dev);
        ++rep.samples;
    }
    rep.verdict = rep.max_deviation <= 1e-6;
    return rep;
}

MatrixRegularReport is_matrix_regular(const OperatorSystem& S, int level, int samples,
                                      std::uint64_t seed) {
    MatrixRegularReport rep;
    rep.sandwich_feasible = true;
    rep.norm_monotone = true;
    rep.worst_margin = std::numeric_limits<double>::infinity();
    Rng rng(seed);
    const auto& basis = level_sa_basis(S, level);
    const int d = static_cast<int>(basis.size());
    const int nk = level * S.ambient_dim;
    const CMatrix I = CMatrix::Identity(nk, nk);

    for (int s = 0; s < samples; ++s) {
        ++rep.samples;
        LevelElement x = random_sa_element(S, level, rng);
        double nrm = op_norm(x.matrix);
        if (nrm < 1e-12) continue;
        CMatrix xm = x.matrix * (rng.uniform(0.3, 0.95) / nrm);

        // maximize t s.t. u - x >= tI, u + x >= tI, u <= I over u in M_n(S)_sa.
        SdpProblem p;
        p.num_vars = d + 1;
        p.c.assign(d + 1, 0.0);
        p.c[d] = -1.0;
        SdpBlock minus, plus, cap;
        minus.dim = plus.dim = cap.dim = nk;
        minus.F.push_back(-xm);
        plus.F.push_back(xm);
        cap.F.push_back(I);
        for (int t = 0; t < d; ++t) {
            minus.F.push_back(basis[t]);
            plus.F.push_back(basis[t]);
            cap.F.push_back(-basis[t]);
        }
        minus.F.push_back(-I);
        plus.F.push_back(-I);
        cap.F.push_back(CMatrix::Zero(nk, nk));
        p.blocks = {minus, plus, cap};
        SdpSolution sol = solve_or_throw(p, "is_matrix_regular");
        double margin = -sol.objective;
        rep.worst_margin = std::min(rep.worst_margin, margin);
        if (margin < -1e-8) rep.sandwich_feasible = false;

        // Monotonicity side: sample a sandwiched pair and compare norms.
        LevelElement u = random_cone_element(S, level, rng);
        double un = op_norm(u.matrix);
        if (un < 1e-12) continue;
        CMatrix D = CMatrix::Zero(2 * nk, 2 * nk);
        D.topLeftCorner(nk, nk) = u.matrix;
        D.bottomRightCorner(nk, nk) = u.matrix;
        CMatrix X0 = CMatrix::Zero(2 * nk, 2 * nk);
        X0.topRightCorner(nk, nk) = x.matrix;
        X0.bottomLeftCorner(nk, nk) = x.matrix;
        double tstar = feas_inf(D, X0);
        if (!std::isfinite(tstar) || tstar < 1e-12) continue;
        CMatrix xs = x.matrix * (0.9 / tstar);
        if (op_norm(xs) > un * (1.0 + 1e-8)) rep.norm_monotone = false;
    }
    return rep;
}

DecompositionReport decomposition_constants(const OperatorSystem& S, int max_level,
                                            int samples, std::uint64_t seed) {
    DecompositionReport rep;
    Rng rng(seed);
    for (int n = 1; n <= max_level; ++n) {
        const auto& basis = level_sa_basis(S, n);
        const int d = static_cast<int>(basis.size());
        const int nk = n * S.ambient_dim;
        const CMatrix I = CMatrix::Identity(nk, nk);
        double rho = 0.0;
        for (int s = 0; s < samples; ++s) {
            LevelElement x = random_sa_element(S, n, rng);
            double nrm = op_norm(x.matrix);
            if (nrm < 1e-12) continue;
            CMatrix xm = x.matrix / nrm;

            // minimize t s.t. u >= 0, u - x >= 0, u <= tI, u - x <= tI.
            SdpProblem p;
            p.num_vars = d + 1;
            p.c.assign(d + 1, 0.0);
            p.c[d] = 1.0;
            SdpBlock b_u, b_v, c_u, c_v;
            b_u.dim = b_v.dim = c_u.dim = c_v.dim = nk;
            b_u.F.push_back(CMatrix::Zero(nk, nk));
            b_v.F.push_back(-xm);
            c_u.F.push_back(CMatrix::Zero(nk, nk));
            c_v.F.push_back(xm);
            for (int t = 0; t < d; ++t) {
                b_u.F.push_back(basis[t]);
                b_v.F.push_back(basis[t]);
                c_u.F.push_back(-basis[t]);
                c_v.F.push_back(-basis[t]);
            }
            b_u.F.push_back(CMatrix::Zero(nk, nk));
            b_v.F.push_back(CMatrix::Zero(nk, nk));
            c_u.F.push_back(I);
            c_v.F.push_back(I);
            p.blocks = {b_u, b_v, c_u, c_v};
            SdpSolution sol = solve_sdp(p);
            if (sol.status == SdpStatus::PrimalInfeasible) {
                rho = std::numeric_limits<double>::infinity();
                break;
            }
            if (sol.status != SdpStatus::Optimal)
                throw ConvergenceFailure("decomposition_constants: solver returned " +
                                         to_string(sol.status));
            rho = std::max(rho, sol.objective);
        }
        rep.rho.push_back(rho);
    }
    rep.dualizable = true;
    for (double r : rep.rho)
        if (!std::isfinite(r)) rep.dualizable = false;
    return rep;
}

}  // namespace opsys
