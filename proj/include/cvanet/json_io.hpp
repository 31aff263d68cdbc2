#pragma once

#include <json.hpp>

#include "cvanet/clustering.hpp"
#include "cvanet/storage.hpp"
#include "cvanet/trace.hpp"

namespace cvanet {

void to_json(nlohmann::json& j, const ValidationReport& r);
void from_json(const nlohmann::json& j, ValidationReport& r);

/// {"algorithm", "range_m", "w_v", "w_d", "t_idle", "t_cont"}
void to_json(nlohmann::json& j, const ClusterConfig& c);
void from_json(const nlohmann::json& j, ClusterConfig& c);

void to_json(nlohmann::json& j, const AlgorithmDescriptor& d);

/// Metadata only; the body is never serialized.
void to_json(nlohmann::json& j, const ScenarioRecord& s);
void from_json(const nlohmann::json& j, ScenarioRecord& s);

void to_json(nlohmann::json& j, const RunRecord& r);
void from_json(const nlohmann::json& j, RunRecord& r);

std::string_view format_name(TraceFormat format);

}  // namespace cvanet
