#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "dropkit/ihvp.hpp"
#include "dropkit/model.hpp"
#include "dropkit/trainer.hpp"

namespace dropkit {

void to_json(nlohmann::json& j, const ModelSpec& spec);
/// Missing keys keep the values already in `spec`.
void from_json(const nlohmann::json& j, ModelSpec& spec);

void to_json(nlohmann::json& j, const TrainConfig& config);
void from_json(const nlohmann::json& j, TrainConfig& config);

void to_json(nlohmann::json& j, const IhvpConfig& config);
void from_json(const nlohmann::json& j, IhvpConfig& config);

void to_json(nlohmann::json& j, const Metrics& m);

/// 16-digit lowercase hex, used for hashes in JSON records.
std::string hex64(std::uint64_t value);
std::uint64_t parse_hex64(const std::string& text);

}  // namespace dropkit
