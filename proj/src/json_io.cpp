#include "opsys/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <utility>

namespace opsys {

namespace {

const Json& require_field(const Json& j, const char* key, const char* what) {
    const auto it = j.find(key);
    if (it == j.end())
        throw ParseError(std::string(what) + ": missing field \"" + key + "\"");
    return *it;
}

int require_int(const Json& j, const char* key, const char* what) {
    const Json& v = require_field(j, key, what);
    if (!v.is_number_integer())
        throw ParseError(std::string(what) + ": field \"" + key + "\" must be an integer");
    return v.get<int>();
}

}  // namespace

Json json_double(double v) {
    if (std::isfinite(v)) return Json(v);
    if (std::isnan(v)) return Json("nan");
    return Json(v > 0 ? "inf" : "-inf");
}

Json matrix_to_json(const CMatrix& m) {
    Json j;
    j["rows"] = static_cast<int>(m.rows());
    j["cols"] = static_cast<int>(m.cols());
    Json entries = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            entries.push_back(Json::array({m(r, c).real(), m(r, c).imag()}));
    j["entries"] = std::move(entries);
    return j;
}

CMatrix matrix_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("matrix: expected an object");
    const int rows = require_int(j, "rows", "matrix");
    const int cols = require_int(j, "cols", "matrix");
    if (rows < 0 || cols < 0) throw ParseError("matrix: negative dimensions");
    const Json& entries = require_field(j, "entries", "matrix");
    if (!entries.is_array() || entries.size() != static_cast<std::size_t>(rows) * cols)
        throw ParseError("matrix: entry count does not match rows*cols");
    CMatrix m(rows, cols);
    std::size_t idx = 0;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c, ++idx) {
            const Json& e = entries[idx];
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
                throw ParseError("matrix: each entry must be [re, im]");
            m(r, c) = Complex(e[0].get<double>(), e[1].get<double>());
        }
    }
    return m;
}

Json system_to_json(const OperatorSystem& s) {
    Json j;
    j["ambient_dim"] = s.ambient_dim;
    Json basis = Json::array();
    for (const CMatrix& b : s.space.basis) basis.push_back(matrix_to_json(b));
    j["basis"] = std::move(basis);
    return j;
}

OperatorSystem system_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("system: expected an object");
    const int k = require_int(j, "ambient_dim", "system");
    if (k < 1) throw ParseError("system: ambient_dim must be positive");
    const Json& basis = require_field(j, "basis", "system");
    if (!basis.is_array() || basis.empty())
        throw ParseError("system: basis must be a non-empty array");
    std::vector<CMatrix> span;
    span.reserve(basis.size());
    for (const Json& b : basis) {
        CMatrix m = matrix_from_json(b);
        if (m.rows() != k || m.cols() != k)
            throw ParseError("system: basis matrix is not ambient_dim x ambient_dim");
        span.push_back(std::move(m));
    }
    return make_system(span);
}

Json map_to_json(const SystemMap& phi) {
    Json j;
    j["domain"] = system_to_json(phi.domain);
    j["codomain"] = system_to_json(phi.codomain);
    j["coeff"] = matrix_to_json(phi.coeff);
    return j;
}

SystemMap map_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("map: expected an object");
    OperatorSystem dom = system_from_json(require_field(j, "domain", "map"));
    OperatorSystem cod = system_from_json(require_field(j, "codomain", "map"));
    CMatrix coeff = matrix_from_json(require_field(j, "coeff", "map"));
    if (coeff.rows() != cod.dim() || coeff.cols() != dom.dim())
        throw ParseError("map: coeff must be codomain-dim x domain-dim");
    return SystemMap{std::move(dom), std::move(cod), std::move(coeff)};
}

Json sdp_problem_to_json(const SdpProblem& p) {
    Json j;
    j["num_vars"] = p.num_vars;
    j["c"] = p.c;
    Json blocks = Json::array();
    for (const SdpBlock& b : p.blocks) {
        Json jb;
        jb["dim"] = b.dim;
        Json fs = Json::array();
        for (const CMatrix& f : b.F) fs.push_back(matrix_to_json(f));
        jb["F"] = std::move(fs);
        blocks.push_back(std::move(jb));
    }
    j["blocks"] = std::move(blocks);
    Json eqs = Json::array();
    for (const SdpEquality& e : p.equalities) {
        Json je;
        je["a"] = e.a;
        je["b"] = e.b;
        eqs.push_back(std::move(je));
    }
    j["equalities"] = std::move(eqs);
    return j;
}

SdpProblem sdp_problem_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("sdp problem: expected an object");
    SdpProblem p;
    p.num_vars = require_int(j, "num_vars", "sdp problem");
    if (p.num_vars < 0) throw ParseError("sdp problem: num_vars must be nonnegative");
    const Json& c = require_field(j, "c", "sdp problem");
    if (!c.is_array() || c.size() != static_cast<std::size_t>(p.num_vars))
        throw ParseError("sdp problem: c must have num_vars entries");
    for (const Json& v : c) {
        if (!v.is_number()) throw ParseError("sdp problem: c entries must be numbers");
        p.c.push_back(v.get<double>());
    }
    const Json& blocks = require_field(j, "blocks", "sdp problem");
    if (!blocks.is_array()) throw ParseError("sdp problem: blocks must be an array");
    for (const Json& jb : blocks) {
        SdpBlock b;
        b.dim = require_int(jb, "dim", "sdp block");
        const Json& fs = require_field(jb, "F", "sdp block");
        if (!fs.is_array() || fs.size() != static_cast<std::size_t>(p.num_vars) + 1)
            throw ParseError("sdp block: F must have num_vars + 1 matrices");
        for (const Json& f : fs) {
            CMatrix m = matrix_from_json(f);
            if (m.rows() != b.dim || m.cols() != b.dim)
                throw ParseError("sdp block: F matrix does not match the block dimension");
            b.F.push_back(std::move(m));
        }
        p.blocks.push_back(std::move(b));
    }
    if (const auto it = j.find("equalities"); it != j.end()) {
        if (!it->is_array()) throw ParseError("sdp problem: equalities must be an array");
        for (const Json& je : *it) {
            SdpEquality e;
            const Json& a = require_field(je, "a", "sdp equality");
            if (!a.is_array() || a.size() != static_cast<std::size_t>(p.num_vars))
                throw ParseError("sdp equality: a must have num_vars entries");
            for (const Json& v : a) e.a.push_back(v.get<double>());
            const Json& b = require_field(je, "b", "sdp equality");
            if (!b.is_number()) throw ParseError("sdp equality: b must be a number");
            e.b = b.get<double>();
            p.equalities.push_back(std::move(e));
        }
    }
    return p;
}

Json sdp_solution_to_json(const SdpSolution& s) {
    Json j;
    j["status"] = to_string(s.status);
    j["objective"] = json_double(s.objective);
    j["dual_objective"] = json_double(s.dual_objective);
    j["gap"] = json_double(s.gap);
    j["primal_residual"] = json_double(s.primal_residual);
    j["dual_residual"] = json_double(s.dual_residual);
    j["iterations"] = s.iterations;
    j["message"] = s.message;
    j["y"] = Json::array();
    for (double v : s.y) j["y"].push_back(json_double(v));
    Json zs = Json::array();
    for (const CMatrix& z : s.Z) zs.push_back(matrix_to_json(z));
    j["Z"] = std::move(zs);
    return j;
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("invalid JSON in ") + path + ": " + e.what());
    }
}

void write_json_atomic(const Json& j, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw Error("cannot open file for writing: " + tmp);
        out << j.dump(2) << '\n';
        if (!out) throw Error("failed writing file: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw Error("failed to move " + tmp + " into place");
}

}  // namespace opsys
