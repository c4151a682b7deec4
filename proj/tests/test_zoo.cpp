#include "doctest.h"

#include "opsys/rng.hpp"
#include "opsys/zoo.hpp"

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

using namespace opsys;

namespace {

bool same_space(const OperatorSystem& a, const OperatorSystem& b) {
    if (a.ambient_dim != b.ambient_dim || a.dim() != b.dim()) return false;
    for (const CMatrix& x : a.space.basis)
        if (!b.contains(x, 1e-10)) return false;
    for (const CMatrix& x : b.space.basis)
        if (!a.contains(x, 1e-10)) return false;
    return true;
}

FiniteMetricSpace line_metric(int n) {
    std::vector<Eigen::VectorXd> pts;
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd v(1);
        v(0) = static_cast<double>(i);
        pts.push_back(v);
    }
    return metric_from_points(pts);
}

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = "/tmp/" + name;
    std::ofstream out(path);
    out << content;
    out.close();
    return path;
}

}  // namespace

TEST_CASE("full and band constructors") {
    OperatorSystem f3 = full_system(3);
    CHECK(f3.ambient_dim == 3);
    CHECK(f3.dim() == 9);
    CHECK(f3.contains(CMatrix::Identity(3, 3)));

    CHECK(same_space(band_system(3, 2), f3));
    CHECK(same_space(band_system(4, 3), full_system(4)));

    OperatorSystem diag4 = band_system(4, 0);
    CHECK(diag4.dim() == 4);
    CHECK(diag4.contains(CMatrix::Identity(4, 4)));
    for (const CMatrix& b : diag4.space.basis)
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                if (i != j) CHECK(std::abs(b(i, j)) < 1e-14);

    OperatorSystem b41 = band_system(4, 1);
    CHECK(b41.dim() == 4 + 2 * 3);
    CMatrix e13 = CMatrix::Zero(4, 4);
    e13(0, 2) = 1.0;
    CHECK_FALSE(b41.contains(e13));
}

TEST_CASE("diagzero constructor and guards") {
    OperatorSystem u2 = diagzero_system(2);
    CHECK(u2.dim() == 2);
    OperatorSystem u3 = diagzero_system(3);
    CHECK(u3.dim() == 6);
    for (const CMatrix& b : u2.space.basis)
        for (int i = 0; i < 2; ++i) CHECK(std::abs(b(i, i)) < 1e-14);

    CHECK_THROWS_AS(diagzero_system(1), DimensionMismatch);
    CHECK_THROWS_AS(full_system(0), DimensionMismatch);
    CHECK_THROWS_AS(band_system(3, 3), DimensionMismatch);
    CHECK_THROWS_AS(band_system(3, -1), DimensionMismatch);
}

TEST_CASE("direct sum splits blocks") {
    OperatorSystem s = direct_sum(full_system(1), full_system(2));
    CHECK(s.ambient_dim == 3);
    CHECK(s.dim() == 5);
    CMatrix d = CMatrix::Zero(3, 3);
    d(0, 0) = 1.0;
    CHECK(s.contains(d));
    CMatrix inner = CMatrix::Zero(3, 3);
    inner(1, 2) = 1.0;
    CHECK(s.contains(inner));
    CMatrix cross = CMatrix::Zero(3, 3);
    cross(0, 1) = 1.0;
    CHECK_FALSE(s.contains(cross));
    CHECK(s.contains(CMatrix::Identity(3, 3)));
}

TEST_CASE("metric from collinear points") {
    FiniteMetricSpace m = line_metric(3);
    Eigen::MatrixXd expect(3, 3);
    expect << 0, 1, 2, 1, 0, 1, 2, 1, 0;
    CHECK((m.dist - expect).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(m.triangle_ok());
    CHECK(m.points.size() == 3);
}

TEST_CASE("tolerance relation boundary behavior") {
    FiniteMetricSpace m = line_metric(4);

    ToleranceRelation rel = tolerance_relation(m, 1.5);
    for (int i = 0; i < 4; ++i) CHECK(rel.adjacency(i, i));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(rel.adjacency(i, j) == rel.adjacency(j, i));

    CHECK(same_space(tolerance_system(m, 1.5), band_system(4, 1)));
    CHECK(same_space(tolerance_system(m, 10.0), full_system(4)));
    CHECK(same_space(tolerance_system(m, 0.5), band_system(4, 0)));
    // strict vs inclusive threshold exactly at an attained distance
    CHECK(same_space(tolerance_system(m, 1.0, true), band_system(4, 0)));
    CHECK(same_space(tolerance_system(m, 1.0, false), band_system(4, 1)));

    CHECK_THROWS_AS(tolerance_system(m, 0.0), Error);
}

TEST_CASE("tolerance systems nest monotonically") {
    Rng rng(404);
    std::vector<Eigen::VectorXd> pts;
    for (int i = 0; i < 4; ++i) {
        Eigen::VectorXd v(2);
        v << rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0);
        pts.push_back(v);
    }
    FiniteMetricSpace m = metric_from_points(pts);
    const double eps1 = 0.7, eps2 = 1.9;
    OperatorSystem small = tolerance_system(m, eps1);
    OperatorSystem large = tolerance_system(m, eps2);
    for (const CMatrix& b : small.space.basis) {
        CHECK(large.contains(b, 1e-12));
    }
}

TEST_CASE("tolerance systems are unital and generating") {
    FiniteMetricSpace m = line_metric(3);
    OperatorSystem s = tolerance_system(m, 1.5);
    auto e = find_order_unit(s);
    REQUIRE(e.has_value());
    CHECK(order_unit_margin(s) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(is_generating(s).generating);
}

TEST_CASE("diagzero cone is trivial at level 1") {
    for (int k = 2; k <= 3; ++k) {
        OperatorSystem u = diagzero_system(k);
        Rng rng(7 + static_cast<std::uint64_t>(k));
        for (int trial = 0; trial < 30; ++trial) {
            LevelElement x = random_sa_element(u, 1, rng);
            if (hs_norm(x.matrix) < 1e-12) continue;
            ConeResult res = cone_membership(u, x);
            CHECK_FALSE(res.in_cone);
            CHECK(hs_inner(res.certificate, x.matrix).real() < 0.0);
        }
        LevelElement zero = make_level_element(u, 1, CMatrix::Zero(k, k));
        CHECK(cone_membership(u, zero).in_cone);
    }
}

TEST_CASE("csv loader: dist matrix") {
    const std::string path = write_temp("opsys_zoo_dist.csv",
                                        "# comment line\n"
                                        "dist\n"
                                        "0, 1, 2\n"
                                        "1, 0, 1\n"
                                        "\n"
                                        "2, 1, 0\n");
    FiniteMetricSpace m = load_metric_csv(path);
    CHECK(m.size() == 3);
    Eigen::MatrixXd expect(3, 3);
    expect << 0, 1, 2, 1, 0, 1, 2, 1, 0;
    CHECK((m.dist - expect).cwiseAbs().maxCoeff() == 0.0);
    CHECK(m.points[0] == "p0");
    std::remove(path.c_str());
}

TEST_CASE("csv loader: coords with exact doubles") {
    // Shortest-round-trip decimals reproduce the doubles bit-exactly.
    const double a = 0.1, b = 2.3000000000000007;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "coords\n%.17g\n%.17g\n", a, b);
    const std::string path = write_temp("opsys_zoo_coords.csv", buf);
    FiniteMetricSpace m = load_metric_csv(path);
    CHECK(m.size() == 2);
    CHECK(m.dist(0, 1) == std::abs(b - a));
    std::remove(path.c_str());

    const std::string p2 = write_temp("opsys_zoo_line.csv", "coords\n0\n1\n2\n");
    FiniteMetricSpace line = load_metric_csv(p2);
    Eigen::MatrixXd expect(3, 3);
    expect << 0, 1, 2, 1, 0, 1, 2, 1, 0;
    CHECK((line.dist - expect).cwiseAbs().maxCoeff() == 0.0);
    std::remove(p2.c_str());
}

TEST_CASE("csv loader: malformed inputs") {
    SUBCASE("ragged row") {
        const std::string path =
            write_temp("opsys_zoo_bad1.csv", "dist\n0,1,2\n1,0\n2,1,0\n");
        try {
            load_metric_csv(path);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line == 3);
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
        std::remove(path.c_str());
    }
    SUBCASE("bad header") {
        const std::string path = write_temp("opsys_zoo_bad2.csv", "matrix\n0,1\n1,0\n");
        CHECK_THROWS_AS(load_metric_csv(path), ParseError);
        std::remove(path.c_str());
    }
    SUBCASE("unparseable number") {
        const std::string path = write_temp("opsys_zoo_bad3.csv", "dist\n0,oops\n1,0\n");
        try {
            load_metric_csv(path);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line == 2);
            CHECK(e.column == 2);
        }
        std::remove(path.c_str());
    }
    SUBCASE("asymmetric matrix") {
        const std::string path =
            write_temp("opsys_zoo_bad4.csv", "dist\n0,1,2\n1.5,0,1\n2,1,0\n");
        CHECK_THROWS_AS(load_metric_csv(path), AsymmetricMatrix);
        std::remove(path.c_str());
    }
    SUBCASE("nonzero diagonal") {
        const std::string path = write_temp("opsys_zoo_bad5.csv", "dist\n0.5,1\n1,0\n");
        CHECK_THROWS_AS(load_metric_csv(path), ParseError);
        std::remove(path.c_str());
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_metric_csv("/tmp/opsys_zoo_no_such_file.csv"), ParseError);
    }
    SUBCASE("non-square matrix") {
        const std::string path = write_temp("opsys_zoo_bad6.csv", "dist\n0,1,2\n1,0,1\n");
        CHECK_THROWS_AS(load_metric_csv(path), ParseError);
        std::remove(path.c_str());
    }
}

TEST_CASE("triangle violations warn but construct") {
    Eigen::MatrixXd d(3, 3);
    d << 0, 1, 5, 1, 0, 1, 5, 1, 0;  // d(0,2) = 5 > 1 + 1 violates the triangle inequality
    FiniteMetricSpace m = metric_from_distances(d);
    CHECK_FALSE(m.triangle_ok());
    CHECK(m.triangle_defect == doctest::Approx(3.0).epsilon(1e-12));
    OperatorSystem s = tolerance_system(m, 1.5);  // construction still works
    CHECK(s.dim() == 3 + 4);
}
