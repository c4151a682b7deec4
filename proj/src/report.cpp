#include "opsys/report.hpp"

#include <iostream>

#include "opsys/rng.hpp"

namespace opsys {

Json run_config_to_json(const RunConfig& cfg) {
    Json j;
    j["seed"] = cfg.seed;
    j["levels"] = cfg.levels;
    j["samples"] = cfg.samples;
    j["tolerances"] = Json{{"feas_tol", cfg.feas_tol},
                           {"gap_tol", cfg.gap_tol},
                           {"verdict_tol", cfg.verdict_tol}};
    return j;
}

Json report_to_json(const Report& report) {
    Json j;
    j["schema"] = "opsys-report/1";
    j["title"] = report.title;
    j["rng"] = Rng::kName;
    j["seed"] = report.config.seed;
    j["config"] = run_config_to_json(report.config);
    Json checks = Json::array();
    for (const CheckRow& row : report.rows) {
        Json jr;
        jr["check"] = row.check;
        jr["value"] = json_double(row.value);
        jr["bound"] = json_double(row.bound);
        jr["tolerance"] = json_double(row.tolerance);
        jr["verdict"] = row.pass ? "pass" : "fail";
        checks.push_back(std::move(jr));
    }
    j["checks"] = std::move(checks);
    j["all_pass"] = report_all_pass(report);
    j["data"] = report.data;
    return j;
}

bool report_all_pass(const Report& report) {
    for (const CheckRow& row : report.rows)
        if (!row.pass) return false;
    return true;
}

void emit_report(const Report& report) {
    const Json j = report_to_json(report);
    std::cout << j.dump(2) << std::endl;
    if (!report.config.output.empty()) write_json_atomic(j, report.config.output);
}

}  // namespace opsys
