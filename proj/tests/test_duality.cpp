#include "doctest.h"

#include "opsys/duality.hpp"
#include "opsys/maps.hpp"
#include "opsys/rng.hpp"
#include "opsys/system.hpp"
#include "opsys/zoo.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

using namespace opsys;

namespace {

CMatrix unit(int k, int p, int q) {
    CMatrix e = CMatrix::Zero(k, k);
    e(p, q) = 1.0;
    return e;
}

// Positive part of a self-adjoint matrix.
CMatrix positive_part(const CMatrix& a) {
    EigResult eig = hermitian_eig(a);
    CMatrix out = CMatrix::Zero(a.rows(), a.cols());
    for (int i = 0; i < static_cast<int>(eig.values.size()); ++i)
        if (eig.values[static_cast<std::size_t>(i)] > 0.0)
            out += eig.values[static_cast<std::size_t>(i)] * eig.vectors.col(i) *
                   eig.vectors.col(i).adjoint();
    return out;
}

// Span {e11, e12, e21} in M_2: cone is {B tensor e11}, supported in a strict
// corner, so the cone neither generates nor are all functionals visible to
// the dual norm.
OperatorSystem corner_system() {
    return make_system({unit(2, 0, 0), unit(2, 0, 1)});
}

// Span {e11} in M_2: one-dimensional, generating, but without an ambient
// order unit (nothing in the system dominates the identity).
OperatorSystem pinched_line_system() {
    return make_system({unit(2, 0, 0)});
}

// Three-point metric whose tolerance relation keeps only the (0,1) edge.
OperatorSystem sparse_tolerance_system() {
    Eigen::MatrixXd dist(3, 3);
    dist << 0.0, 1.0, 2.5, 1.0, 0.0, 2.0, 2.5, 2.0, 0.0;
    return tolerance_system(metric_from_distances(dist), 1.5);
}

}  // namespace

TEST_CASE("dual system construction flags") {
    DualSystem df = dual_system(full_system(2));
    CHECK(df.generating);
    CHECK_FALSE(df.degenerate);
    CHECK(df.iota_verified);
    CHECK(df.dual_basis.size() == 4);

    DualSystem db = dual_system(band_system(3, 1));
    CHECK(db.generating);
    CHECK_FALSE(db.degenerate);
    CHECK(db.iota_verified);

    DualSystem dz = dual_system(diagzero_system(2));
    CHECK_FALSE(dz.generating);
    CHECK(dz.degenerate);
    CHECK_FALSE(dz.iota_verified);

    DualSystem dc = dual_system(corner_system());
    CHECK_FALSE(dc.generating);
    CHECK(dc.degenerate);

    DualSystem dp = dual_system(pinched_line_system());
    CHECK(dp.generating);
    CHECK_FALSE(dp.degenerate);
}

TEST_CASE("dual cone membership and sa decomposition") {
    OperatorSystem s = full_system(2);
    DualSystem d = dual_system(s);

    LevelFunctional pos = make_functional(s, 1, CMatrix::Identity(2, 2));
    CHECK(dual_cone_member(d, pos));
    CHECK(d.cone_oracle(pos));

    CMatrix sig(2, 2);
    sig << 1.0, 0.0, 0.0, -1.0;
    LevelFunctional mixed = make_functional(s, 1, sig);
    CHECK_FALSE(dual_cone_member(d, mixed));

    // Every self-adjoint functional splits as a difference of two dual-cone
    // members (positive/negative parts of the representer), so the dual cone
    // generates the self-adjoint functionals.
    Rng rng(11);
    for (const OperatorSystem& sys :
         {full_system(2), band_system(3, 1), diagzero_system(2)}) {
        DualSystem dd = dual_system(sys);
        const int k = sys.ambient_dim;
        for (int i = 0; i < 3; ++i) {
            LevelFunctional f = make_functional(sys, 1, rng.hermitian(k));
            CMatrix plus = positive_part(f.rep);
            CMatrix minus = positive_part(CMatrix(-f.rep));
            LevelFunctional g = make_functional(sys, 1, plus);
            LevelFunctional h = make_functional(sys, 1, minus);
            CHECK(dual_cone_member(dd, g));
            CHECK(dual_cone_member(dd, h));
            CHECK(hs_norm(CMatrix(g.rep - h.rep - f.rep)) < 1e-10);
        }
    }
}

TEST_CASE("dual norm reference values") {
    SUBCASE("trace functional on full algebras") {
        for (int k : {2, 3}) {
            OperatorSystem s = full_system(k);
            DualSystem d = dual_system(s);
            LevelFunctional tr = make_functional(s, 1, CMatrix::Identity(k, k));
            CHECK(std::abs(dual_norm(d, tr) - static_cast<double>(k)) < 1e-6);
        }
    }

    SUBCASE("zero functional") {
        OperatorSystem s = full_system(2);
        DualSystem d = dual_system(s);
        LevelFunctional z = make_functional(s, 1, CMatrix::Zero(2, 2));
        CHECK(dual_norm(d, z) == 0.0);
    }

    SUBCASE("degenerate dual annihilates everything") {
        OperatorSystem s = diagzero_system(2);
        DualSystem d = dual_system(s);
        Rng rng(3);
        for (int i = 0; i < 3; ++i) {
            LevelFunctional f = make_functional(s, 1, rng.hermitian(2));
            CHECK(dual_norm(d, f) <= 1e-9);
            CHECK(d.norm_oracle(f) <= 1e-9);
        }
    }

    SUBCASE("scalar system at level two matches the cb norm") {
        OperatorSystem s = full_system(1);
        DualSystem d = dual_system(s);
        LevelFunctional f = make_functional(s, 2, CMatrix::Identity(2, 2));
        CHECK(std::abs(dual_norm(d, f) - 1.0) < 1e-6);
    }

    SUBCASE("strict gap against the cb norm") {
        OperatorSystem s = full_system(2);
        DualSystem d = dual_system(s);
        CMatrix sig(2, 2);
        sig << 1.0, 0.0, 0.0, -1.0;
        LevelFunctional f = make_functional(s, 1, sig);
        CHECK(std::abs(dual_norm(d, f) - 1.0) < 1e-5);
        DualNormReport r = iota_compare(d, f);
        CHECK(std::abs(r.cb_value - 2.0) < 1e-4);
        CHECK(std::abs(r.ratio - 2.0) < 1e-3);
        CHECK_FALSE(r.not_dualizable);
    }

    SUBCASE("positive functionals are isometric") {
        Rng rng(7);
        for (const OperatorSystem& s : {full_system(2), band_system(3, 1)}) {
            DualSystem d = dual_system(s);
            for (int level = 1; level <= 2; ++level) {
                LevelFunctional f = make_functional(s, level, rng.psd(level * s.ambient_dim));
                DualNormReport r = iota_compare(d, f);
                CHECK(std::abs(r.r_value - r.cb_value) <= 1e-5 * std::max(1.0, r.cb_value));
            }
        }
    }

    SUBCASE("dual norm never exceeds the cb norm") {
        Rng rng(13);
        for (const OperatorSystem& s : {full_system(2), band_system(3, 1)}) {
            DualSystem d = dual_system(s);
            for (int i = 0; i < 4; ++i) {
                const int level = 1 + (i % 2);
                LevelFunctional f = make_functional(s, level, rng.hermitian(level * s.ambient_dim));
                DualNormReport r = iota_compare(d, f);
                CHECK(r.r_value <= r.cb_value + 1e-8);
            }
        }
    }

    SUBCASE("corner-supported systems") {
        OperatorSystem pinched = pinched_line_system();
        DualSystem dp = dual_system(pinched);
        LevelFunctional fe = make_functional(pinched, 1, unit(2, 0, 0));
        CHECK(std::abs(dual_norm(dp, fe) - 1.0) < 1e-6);

        OperatorSystem corner = corner_system();
        DualSystem dc = dual_system(corner);
        LevelFunctional f11 = make_functional(corner, 1, unit(2, 0, 0));
        CHECK(std::abs(dual_norm(dc, f11) - 1.0) < 1e-5);
        LevelFunctional f12 = make_functional(corner, 1, unit(2, 0, 1));
        CHECK(dual_norm(dc, f12) <= 1e-9);
        DualNormReport r = iota_compare(dc, f12);
        CHECK(r.not_dualizable);
        CHECK(std::isinf(r.ratio));
    }
}

TEST_CASE("iota comparison reports") {
    OperatorSystem f3 = full_system(3);
    DualSystem d3 = dual_system(f3);
    LevelFunctional tr = make_functional(f3, 1, CMatrix::Identity(3, 3));
    DualNormReport rt = iota_compare(d3, tr);
    CHECK(std::abs(rt.ratio - 1.0) < 1e-5);
    CHECK_FALSE(rt.not_dualizable);

    OperatorSystem dz = diagzero_system(2);
    DualSystem ddz = dual_system(dz);
    Rng rng(5);
    LevelFunctional f = make_functional(dz, 1, rng.hermitian(2));
    REQUIRE(hs_norm(f.rep) > 1e-6);
    DualNormReport rz = iota_compare(ddz, f);
    CHECK(rz.not_dualizable);
    CHECK(std::isinf(rz.ratio));

    OperatorSystem band = band_system(3, 1);
    DualSystem db = dual_system(band);
    for (int i = 0; i < 4; ++i) {
        const int level = 1 + (i % 2);
        LevelFunctional g = make_functional(band, level, rng.hermitian(3 * level));
        DualNormReport r = iota_compare(db, g);
        CHECK(r.ratio >= 1.0 - 1e-6);
        CHECK(r.ratio <= 4.0 + 1e-4);
        CHECK(r.r_value <= r.cb_value + 1e-8);
    }
}

TEST_CASE("dual functor") {
    SUBCASE("identity map") {
        OperatorSystem s = full_system(2);
        DualFunctorResult r = functor_dual_map(identity_map(s), 3, 21);
        CHECK(r.report.pass);
        CHECK(r.report.identity_law);
        CHECK(r.report.cone_preserved);
        CHECK(r.report.norm_contractive);
        CHECK(r.report.contravariance_defect <= 1e-9);
        CHECK((r.dual_map.coeff - Eigen::MatrixXcd::Identity(4, 4)).norm() < 1e-12);
    }

    SUBCASE("corner compression") {
        OperatorSystem band = band_system(3, 1);
        OperatorSystem f2 = full_system(2);
        SystemMap comp = map_from_action(
            band, f2, [](const CMatrix& x) { return CMatrix(x.block(0, 0, 2, 2)); });
        DualFunctorResult r = functor_dual_map(comp, 3, 22);
        CHECK(r.report.pass);
        CHECK(r.report.cone_preserved);
        CHECK(r.report.norm_contractive);
        CHECK(r.report.max_norm_excess <= 1e-6);
    }

    SUBCASE("rejects maps that are not completely positive or not contractive") {
        OperatorSystem s = full_system(2);
        CHECK_THROWS_AS((void)functor_dual_map(transpose_map(s)), NotCCP);
        CHECK_THROWS_AS((void)functor_dual_map(scale_map(identity_map(s), 2.0)), NotCCP);
    }

    SUBCASE("distinct maps have distinct duals") {
        OperatorSystem s = full_system(2);
        SystemMap id = identity_map(s);
        SystemMap pinch = map_from_action(s, s, [](const CMatrix& x) {
            CMatrix y = CMatrix::Zero(2, 2);
            y(0, 0) = x(0, 0);
            y(1, 1) = x(1, 1);
            return y;
        });
        DualFunctorResult rid = functor_dual_map(id, 2, 23);
        DualFunctorResult rpi = functor_dual_map(pinch, 2, 23);
        LevelFunctional g = make_functional(s, 1, unit(2, 0, 1) + unit(2, 1, 0));
        LevelFunctional a = map_functional(rid.dual_map, g);
        LevelFunctional b = map_functional(rpi.dual_map, g);
        CHECK(hs_norm(CMatrix(a.rep - b.rep)) > 0.5);
    }
}

TEST_CASE("double dual comparison") {
    DoubleDualConfig cfg;
    cfg.levels = 2;
    cfg.samples_per_level = 4;
    cfg.seed = 31;

    SUBCASE("full algebra") {
        DoubleDualReport r = double_dual_compare(full_system(2), cfg);
        CHECK(r.generating);
        CHECK(r.has_order_unit);
        CHECK(r.cone_ok);
        CHECK(r.positive_norm_ok);
        CHECK(r.isometry_ok);
        CHECK(r.pass);
        CHECK(r.max_restricted_cross_dev <= 1e-5);
    }

    SUBCASE("band system") {
        DoubleDualReport r = double_dual_compare(band_system(3, 1), cfg);
        CHECK(r.pass);
        CHECK(r.cone_ok);
        CHECK(r.isometry_ok);
    }

    SUBCASE("sparse tolerance system") {
        DoubleDualConfig small = cfg;
        small.samples_per_level = 3;
        DoubleDualReport r = double_dual_compare(sparse_tolerance_system(), small);
        CHECK(r.pass);
        CHECK(r.has_order_unit);
    }

    SUBCASE("generating system without an order unit") {
        DoubleDualReport r = double_dual_compare(pinched_line_system(), cfg);
        CHECK(r.generating);
        CHECK_FALSE(r.has_order_unit);
        CHECK(r.cone_ok);
        CHECK(r.positive_norm_ok);
        CHECK(r.pass);
    }

    SUBCASE("non-generating systems are rejected") {
        CHECK_THROWS_AS((void)double_dual_compare(diagzero_system(2), cfg), NotGenerating);
    }
}

TEST_CASE("bipolar separation witnesses live in the dual cone") {
    OperatorSystem s = full_system(2);
    DualSystem d = dual_system(s);
    Rng rng(41);
    int separated = 0;
    for (int i = 0; i < 6 && separated < 3; ++i) {
        LevelElement x = random_sa_element(s, 1, rng);
        ConeResult cm = cone_membership(s, x);
        if (cm.in_cone || cm.min_eig > -1e-6) continue;
        SeparationReport sep = separate_from_cone(s, x);
        CHECK(dual_cone_member(d, sep.functional));
        CHECK(std::real(eval(sep.functional, x.matrix)) < 0.0);
        ++separated;
    }
    CHECK(separated >= 1);
}

TEST_CASE("theorem equivalence suite") {
    TheoremSuiteConfig cfg;
    cfg.levels = 2;
    cfg.samples = 6;
    cfg.seed = 51;

    for (const OperatorSystem& s : {full_system(3), band_system(3, 1), diagzero_system(2),
                                    corner_system(), pinched_line_system()}) {
        TheoremSuiteReport r = verify_theorem_suite(s, cfg);
        CHECK(r.rows.size() == 3);
        CHECK(r.all_consistent);
    }
}
