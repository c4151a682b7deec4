#include "opsys/zoo.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace opsys {

namespace {

CMatrix matrix_unit(int k, int p, int q) {
    CMatrix e = CMatrix::Zero(k, k);
    e(p, q) = Complex(1.0, 0.0);
    return e;
}

std::vector<std::string> default_labels(int n) {
    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) labels.push_back("p" + std::to_string(i));
    return labels;
}

double triangle_defect_of(const Eigen::MatrixXd& d) {
    const int n = static_cast<int>(d.rows());
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l)
                worst = std::max(worst, d(i, l) - d(i, j) - d(j, l));
    return worst;
}

}  // namespace

OperatorSystem full_system(int k) {
    if (k < 1) throw DimensionMismatch("full_system: ambient dimension must be at least 1");
    return make_system(full_hermitian_basis(k));
}

OperatorSystem diagzero_system(int k) {
    if (k < 2)
        throw DimensionMismatch(
            "diagzero_system: ambient dimension must be at least 2 (k = 1 gives the zero space)");
    std::vector<CMatrix> gens;
    for (int p = 0; p < k; ++p)
        for (int q = 0; q < k; ++q)
            if (p != q) gens.push_back(matrix_unit(k, p, q));
    return make_system(gens);
}

OperatorSystem band_system(int n, int bandwidth) {
    if (n < 1) throw DimensionMismatch("band_system: ambient dimension must be at least 1");
    if (bandwidth < 0 || bandwidth >= n)
        throw DimensionMismatch("band_system: bandwidth must satisfy 0 <= bandwidth < n");
    std::vector<CMatrix> gens;
    for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q)
            if (std::abs(p - q) <= bandwidth) gens.push_back(matrix_unit(n, p, q));
    return make_system(gens);
}

OperatorSystem direct_sum(const OperatorSystem& s, const OperatorSystem& t) {
    const int ks = s.ambient_dim;
    const int kt = t.ambient_dim;
    const int k = ks + kt;
    std::vector<CMatrix> gens;
    for (const CMatrix& b : s.space.basis) {
        CMatrix g = CMatrix::Zero(k, k);
        g.topLeftCorner(ks, ks) = b;
        gens.push_back(g);
    }
    for (const CMatrix& b : t.space.basis) {
        CMatrix g = CMatrix::Zero(k, k);
        g.bottomRightCorner(kt, kt) = b;
        gens.push_back(g);
    }
    return make_system(gens);
}

FiniteMetricSpace metric_from_points(const std::vector<Eigen::VectorXd>& coords,
                                     std::vector<std::string> labels) {
    if (coords.empty()) throw EmptySpan("metric_from_points: no points given");
    const int n = static_cast<int>(coords.size());
    const auto dim = coords.front().size();
    for (const auto& c : coords)
        if (c.size() != dim)
            throw DimensionMismatch("metric_from_points: coordinate rows have mixed lengths");
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double dij = (coords[static_cast<std::size_t>(i)] -
                                coords[static_cast<std::size_t>(j)])
                                   .norm();
            d(i, j) = dij;
            d(j, i) = dij;
        }
    FiniteMetricSpace m;
    m.points = labels.empty() ? default_labels(n) : std::move(labels);
    if (static_cast<int>(m.points.size()) != n)
        throw DimensionMismatch("metric_from_points: label count does not match point count");
    m.dist = std::move(d);
    m.triangle_defect = triangle_defect_of(m.dist);
    return m;
}

FiniteMetricSpace metric_from_distances(const Eigen::MatrixXd& dist,
                                        std::vector<std::string> labels) {
    if (dist.rows() == 0) throw EmptySpan("metric_from_distances: empty matrix");
    if (dist.rows() != dist.cols())
        throw DimensionMismatch("metric_from_distances: matrix must be square");
    const int n = static_cast<int>(dist.rows());
    const double scale = std::max(1.0, dist.cwiseAbs().maxCoeff());
    for (int i = 0; i < n; ++i) {
        if (std::abs(dist(i, i)) > 1e-12 * scale)
            throw Error("metric_from_distances: diagonal entry (" + std::to_string(i) + "," +
                        std::to_string(i) + ") is not zero");
        for (int j = 0; j < n; ++j) {
            if (dist(i, j) < -1e-12 * scale)
                throw Error("metric_from_distances: negative distance at (" + std::to_string(i) +
                            "," + std::to_string(j) + ")");
            if (std::abs(dist(i, j) - dist(j, i)) > 1e-12 * scale)
                throw AsymmetricMatrix("metric_from_distances: entries (" + std::to_string(i) +
                                       "," + std::to_string(j) + ") and (" + std::to_string(j) +
                                       "," + std::to_string(i) + ") differ");
        }
    }
    FiniteMetricSpace m;
    m.points = labels.empty() ? default_labels(n) : std::move(labels);
    if (static_cast<int>(m.points.size()) != n)
        throw DimensionMismatch("metric_from_distances: label count does not match matrix size");
    m.dist = dist;
    m.triangle_defect = triangle_defect_of(m.dist);
    return m;
}

ToleranceRelation tolerance_relation(const FiniteMetricSpace& m, double eps, bool strict) {
    if (!(eps > 0.0)) throw Error("tolerance_relation: eps must be positive");
    const int n = m.size();
    ToleranceRelation rel;
    rel.adjacency.resize(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            rel.adjacency(i, j) = strict ? (m.dist(i, j) < eps) : (m.dist(i, j) <= eps);
    return rel;
}

OperatorSystem relation_system(const ToleranceRelation& rel) {
    const int n = rel.size();
    if (n < 1) throw EmptySpan("relation_system: empty relation");
    for (int i = 0; i < n; ++i) {
        if (!rel.adjacency(i, i)) throw Error("relation_system: relation is not reflexive");
        for (int j = 0; j < n; ++j)
            if (rel.adjacency(i, j) != rel.adjacency(j, i))
                throw AsymmetricMatrix("relation_system: relation is not symmetric");
    }
    std::vector<CMatrix> gens;
    for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q)
            if (rel.adjacency(p, q)) gens.push_back(matrix_unit(n, p, q));
    return make_system(gens);
}

OperatorSystem tolerance_system(const FiniteMetricSpace& m, double eps, bool strict) {
    return relation_system(tolerance_relation(m, eps, strict));
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& field, int line_no, int col_no) {
    if (field.empty())
        throw ParseError("empty numeric field at line " + std::to_string(line_no) + ", column " +
                             std::to_string(col_no),
                         line_no, col_no);
    std::size_t pos = 0;
    double value = 0.0;
    try {
        value = std::stod(field, &pos);
    } catch (const std::exception&) {
        throw ParseError("cannot parse number '" + field + "' at line " + std::to_string(line_no) +
                             ", column " + std::to_string(col_no),
                         line_no, col_no);
    }
    if (pos != field.size())
        throw ParseError("trailing characters in number '" + field + "' at line " +
                             std::to_string(line_no) + ", column " + std::to_string(col_no),
                         line_no, col_no);
    return value;
}

}  // namespace

FiniteMetricSpace load_metric_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");

    struct Row {
        int line_no;
        std::vector<double> values;
    };
    std::string header;
    std::vector<Row> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string content = trim(line);
        if (content.empty() || content.front() == '#') continue;
        if (header.empty()) {
            header = content;
            if (header != "coords" && header != "dist")
                throw ParseError("expected header 'coords' or 'dist' at line " +
                                     std::to_string(line_no) + ", got '" + content + "'",
                                 line_no, 1);
            continue;
        }
        Row row;
        row.line_no = line_no;
        const auto fields = split_fields(content);
        for (std::size_t c = 0; c < fields.size(); ++c)
            row.values.push_back(
                parse_double(fields[c], line_no, static_cast<int>(c) + 1));
        if (!rows.empty() && row.values.size() != rows.front().values.size())
            throw ParseError("row at line " + std::to_string(line_no) + " has " +
                                 std::to_string(row.values.size()) + " fields, expected " +
                                 std::to_string(rows.front().values.size()),
                             line_no, 1);
        rows.push_back(std::move(row));
    }
    if (header.empty()) throw ParseError("'" + path + "' has no header line");
    if (rows.empty()) throw ParseError("'" + path + "' has no data rows", line_no, 1);

    if (header == "coords") {
        std::vector<Eigen::VectorXd> coords;
        coords.reserve(rows.size());
        for (const Row& r : rows) {
            Eigen::VectorXd v(static_cast<Eigen::Index>(r.values.size()));
            for (std::size_t i = 0; i < r.values.size(); ++i)
                v(static_cast<Eigen::Index>(i)) = r.values[i];
            coords.push_back(std::move(v));
        }
        return metric_from_points(coords);
    }

    const int n = static_cast<int>(rows.size());
    if (static_cast<int>(rows.front().values.size()) != n)
        throw ParseError("distance matrix is not square: " + std::to_string(n) + " rows of " +
                             std::to_string(rows.front().values.size()) + " fields",
                         rows.back().line_no, 1);
    Eigen::MatrixXd d(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) d(i, j) = rows[static_cast<std::size_t>(i)].values[static_cast<std::size_t>(j)];
    for (int i = 0; i < n; ++i) {
        if (std::abs(d(i, i)) > 1e-12)
            throw ParseError("nonzero diagonal entry at line " +
                                 std::to_string(rows[static_cast<std::size_t>(i)].line_no) +
                                 ", column " + std::to_string(i + 1),
                             rows[static_cast<std::size_t>(i)].line_no, i + 1);
        for (int j = 0; j < n; ++j)
            if (d(i, j) < 0.0)
                throw ParseError("negative distance at line " +
                                     std::to_string(rows[static_cast<std::size_t>(i)].line_no) +
                                     ", column " + std::to_string(j + 1),
                                 rows[static_cast<std::size_t>(i)].line_no, j + 1);
    }
    return metric_from_distances(d);
}

}  // namespace opsys
