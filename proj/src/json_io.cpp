#include "cvanet/json_io.hpp"

#include "cvanet/error.hpp"

namespace cvanet {

std::string_view format_name(TraceFormat format) {
  return format == TraceFormat::kFcdXml ? "fcd-xml" : "csv";
}

void to_json(nlohmann::json& j, const ValidationReport& r) {
  j = {{"n_timesteps", r.n_timesteps},
       {"n_vehicles", r.n_vehicles},
       {"warnings", r.warnings},
       {"errors", r.errors}};
}

void from_json(const nlohmann::json& j, ValidationReport& r) {
  j.at("n_timesteps").get_to(r.n_timesteps);
  j.at("n_vehicles").get_to(r.n_vehicles);
  j.at("warnings").get_to(r.warnings);
  j.at("errors").get_to(r.errors);
}

void to_json(nlohmann::json& j, const ClusterConfig& c) {
  j = {{"algorithm", algorithm_id(c.algorithm)},
       {"range_m", c.range},
       {"w_v", c.w_v},
       {"w_d", c.w_d},
       {"t_idle", c.t_idle},
       {"t_cont", c.t_cont}};
}

void from_json(const nlohmann::json& j, ClusterConfig& c) {
  c.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
  j.at("range_m").get_to(c.range);
  j.at("w_v").get_to(c.w_v);
  j.at("w_d").get_to(c.w_d);
  j.at("t_idle").get_to(c.t_idle);
  j.at("t_cont").get_to(c.t_cont);
}

void to_json(nlohmann::json& j, const AlgorithmDescriptor& d) {
  auto params = nlohmann::json::array();
  for (const auto& p : d.params) {
    params.push_back({{"name", p.name}, {"type", p.type}, {"default", p.default_value}});
  }
  j = {{"id", d.id}, {"label", d.label}, {"params", params}};
}

void to_json(nlohmann::json& j, const ScenarioRecord& s) {
  j = {{"id", s.id},
       {"name", s.name},
       {"created_at", s.created_at},
       {"format", format_name(s.format)},
       {"n_timesteps", s.validation.n_timesteps},
       {"n_vehicles", s.validation.n_vehicles},
       {"warnings", s.validation.warnings},
       {"validation", s.validation}};
}

void from_json(const nlohmann::json& j, ScenarioRecord& s) {
  j.at("id").get_to(s.id);
  j.at("name").get_to(s.name);
  j.at("created_at").get_to(s.created_at);
  s.format = j.at("format").get<std::string>() == "fcd-xml" ? TraceFormat::kFcdXml : TraceFormat::kCsv;
  j.at("validation").get_to(s.validation);
}

void to_json(nlohmann::json& j, const RunRecord& r) {
  j = {{"id", r.id},
       {"scenario_id", r.scenario_id},
       {"config", r.config},
       {"status", status_name(r.status)},
       {"progress", r.progress},
       {"error", r.error},
       {"created_at", r.created_at}};
}

void from_json(const nlohmann::json& j, RunRecord& r) {
  j.at("id").get_to(r.id);
  j.at("scenario_id").get_to(r.scenario_id);
  j.at("config").get_to(r.config);
  const auto status = parse_status(j.at("status").get<std::string>());
  if (!status) throw UsageError("unknown run status in " + r.id);
  r.status = *status;
  j.at("progress").get_to(r.progress);
  j.at("error").get_to(r.error);
  j.at("created_at").get_to(r.created_at);
}

}  // namespace cvanet
