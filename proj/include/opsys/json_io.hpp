#pragma once

#include "opsys/cmatrix.hpp"
#include "opsys/maps.hpp"
#include "opsys/sdp.hpp"
#include "opsys/system.hpp"

#include "json.hpp"

#include <string>

namespace opsys {

// Insertion-ordered JSON so serialization is deterministic.
using Json = nlohmann::ordered_json;

// Doubles serialize with shortest round-trip decimals; non-finite values,
// which plain JSON cannot carry, become the strings "inf", "-inf", "nan".
Json json_double(double v);

// {"rows": r, "cols": c, "entries": [[re, im], ...]} in row-major order.
Json matrix_to_json(const CMatrix& m);
CMatrix matrix_from_json(const Json& j);

// {"ambient_dim": k, "basis": [matrix, ...]}; reading rebuilds the system
// from the spanning set.
Json system_to_json(const OperatorSystem& s);
OperatorSystem system_from_json(const Json& j);

// {"domain": system, "codomain": system, "coeff": matrix}.
Json map_to_json(const SystemMap& phi);
SystemMap map_from_json(const Json& j);

Json sdp_problem_to_json(const SdpProblem& p);
SdpProblem sdp_problem_from_json(const Json& j);
Json sdp_solution_to_json(const SdpSolution& s);

// Parse a file; throws ParseError on IO or syntax problems.
Json read_json_file(const std::string& path);

// Write to a temporary file in the same directory, then rename into place.
void write_json_atomic(const Json& j, const std::string& path);

}  // namespace opsys
