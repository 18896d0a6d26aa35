#include "dropkit/report_io.hpp"

#include <sstream>

#include "dropkit/io.hpp"
#include "dropkit/json.hpp"

namespace dropkit {

std::string format_report_jsonl(const InfluenceReport& report) {
    nlohmann::json header = {{"type", "header"},
                             {"k", report.k_validation},
                             {"n", report.n_train},
                             {"ihvp_solve_count", report.ihvp_solve_count},
                             {"solver", report.config_echo},
                             {"residuals", report.ihvp_residuals},
                             {"iterations", report.ihvp_iterations},
                             {"cg_fallbacks", report.cg_fallbacks},
                             {"model_hash", hex64(report.model_hash)}};
    std::string out = header.dump() + "\n";
    for (const auto& s : report.scores) {
        nlohmann::json rec = {{"id", s.sample_id}, {"total", s.total}};
        if (!s.per_validation.empty()) rec["per_validation"] = s.per_validation;
        out += rec.dump() + "\n";
    }
    return out;
}

InfluenceReport parse_report_jsonl(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    InfluenceReport report;
    bool have_header = false;
    try {
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line);
            if (!have_header) {
                if (j.value("type", "") != "header") {
                    throw ConfigError("influence report must start with a header record");
                }
                report.k_validation = j.at("k").get<std::size_t>();
                report.n_train = j.at("n").get<std::size_t>();
                report.ihvp_solve_count = j.at("ihvp_solve_count").get<std::size_t>();
                j.at("solver").get_to(report.config_echo);
                j.at("residuals").get_to(report.ihvp_residuals);
                if (j.contains("iterations")) j.at("iterations").get_to(report.ihvp_iterations);
                if (j.contains("cg_fallbacks")) j.at("cg_fallbacks").get_to(report.cg_fallbacks);
                report.model_hash = parse_hex64(j.at("model_hash").get<std::string>());
                have_header = true;
                continue;
            }
            InfluenceScore s;
            s.sample_id = j.at("id").get<std::int64_t>();
            s.total = j.at("total").get<double>();
            if (j.contains("per_validation")) j.at("per_validation").get_to(s.per_validation);
            report.scores.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("influence report line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!have_header) throw ConfigError("influence report is empty");
    if (report.scores.size() != report.n_train) {
        throw ConfigError("influence report lists " + std::to_string(report.scores.size()) +
                          " scores but its header says n=" + std::to_string(report.n_train));
    }
    return report;
}

void write_report(const std::filesystem::path& path, const InfluenceReport& report) {
    write_file_atomic(path, format_report_jsonl(report));
}

InfluenceReport read_report(const std::filesystem::path& path) {
    return parse_report_jsonl(read_file(path));
}

}  // namespace dropkit
