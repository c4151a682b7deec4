#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "opsys/duality.hpp"
#include "opsys/json_io.hpp"

namespace opsys {

// Shared run parameters for verification commands; identical configs and
// inputs must produce byte-identical report files.
struct RunConfig {
    std::uint64_t seed = 7;
    int levels = 2;
    int samples = 20;
    double feas_tol = 1e-8;
    double gap_tol = 1e-8;
    double verdict_tol = 1e-6;
    std::string output;  // report path; empty means stdout only
};

struct Report {
    std::string title;
    RunConfig config;
    std::vector<CheckRow> rows;
    Json data = Json::object();  // command-specific payload
};

Json run_config_to_json(const RunConfig& cfg);

// Serializes with a versioned schema header naming the RNG and seed, one
// entry per check row, and the extra payload under "data".
Json report_to_json(const Report& report);

bool report_all_pass(const Report& report);

// Writes the report atomically to report.config.output when set and always
// echoes the JSON to stdout.
void emit_report(const Report& report);

}  // namespace opsys
