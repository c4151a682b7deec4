#pragma once

#include "opsys/system.hpp"

#include <string>
#include <vector>

namespace opsys {

// Distance matrix fails symmetry when building or loading a metric space.
struct AsymmetricMatrix : Error {
    using Error::Error;
};

// Finite metric space: point labels plus a symmetric nonnegative distance
// matrix with zero diagonal.  Triangle-inequality violations are recorded
// (largest defect), not rejected: the relation construction below needs only
// reflexivity and symmetry.
struct FiniteMetricSpace {
    std::vector<std::string> points;
    Eigen::MatrixXd dist;
    double triangle_defect = 0.0;

    int size() const { return static_cast<int>(points.size()); }
    bool triangle_ok(double tol = 1e-10) const { return triangle_defect <= tol; }
};

// Reflexive symmetric boolean relation on {0, ..., n-1}.
struct ToleranceRelation {
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> adjacency;

    int size() const { return static_cast<int>(adjacency.rows()); }
};

// All of M_k.
OperatorSystem full_system(int k);

// {A in M_k : A_ii = 0 for all i}; requires k >= 2 (k = 1 leaves only {0}).
OperatorSystem diagzero_system(int k);

// {A in M_n : A_ij = 0 when |i-j| > bandwidth}; 0 <= bandwidth < n.
// bandwidth = 0 gives the diagonal matrices, bandwidth = n-1 all of M_n.
OperatorSystem band_system(int n, int bandwidth);

// Block-diagonal sum in M_{k_s + k_t}: {diag(s, t) : s in S, t in T}.
OperatorSystem direct_sum(const OperatorSystem& s, const OperatorSystem& t);

// Euclidean metric from coordinate rows (all of one dimension).
// Labels default to "p0", "p1", ....
FiniteMetricSpace metric_from_points(const std::vector<Eigen::VectorXd>& coords,
                                     std::vector<std::string> labels = {});

// Validates squareness, symmetry (AsymmetricMatrix), nonnegativity and zero
// diagonal, and measures the triangle defect.
FiniteMetricSpace metric_from_distances(const Eigen::MatrixXd& dist,
                                        std::vector<std::string> labels = {});

// Relation {(i,j) : dist(i,j) < eps} (or <= eps when strict = false).
// Requires eps > 0 so the relation is reflexive.
ToleranceRelation tolerance_relation(const FiniteMetricSpace& m, double eps,
                                     bool strict = true);

// Span of the matrix units e_{ij} with (i,j) related; contains the identity
// by reflexivity, hence unital.
OperatorSystem relation_system(const ToleranceRelation& rel);

// relation_system(tolerance_relation(m, eps, strict)).
OperatorSystem tolerance_system(const FiniteMetricSpace& m, double eps,
                                bool strict = true);

// CSV loader.  Lines that are blank or start with '#' are skipped.  The first
// content line is a header: "coords" (rows are point coordinates; Euclidean
// distances computed) or "dist" (rows form an explicit square distance
// matrix).  Throws ParseError (with 1-based line/column) on malformed input
// and AsymmetricMatrix when a distance matrix is not symmetric.
FiniteMetricSpace load_metric_csv(const std::string& path);

}  // namespace opsys
