#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "dropkit/influence.hpp"

namespace dropkit {

/// JSON-lines: one header record, then one record per training sample.
///
///   {"type":"header","k":..,"n":..,"ihvp_solve_count":..,"solver":{..},
///    "residuals":[..],"iterations":[..],"cg_fallbacks":[..],"model_hash":"<hex>"}
///   {"id":..,"total":..,"per_validation":[..]}
std::string format_report_jsonl(const InfluenceReport& report);
InfluenceReport parse_report_jsonl(std::string_view text);

void write_report(const std::filesystem::path& path, const InfluenceReport& report);
InfluenceReport read_report(const std::filesystem::path& path);

}  // namespace dropkit
