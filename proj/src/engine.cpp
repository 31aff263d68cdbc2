#include "cvanet/engine.hpp"

#include "cvanet/error.hpp"
#include "cvanet/features.hpp"

namespace cvanet {

namespace {

void emit_records(const ClusterState& state, const FeatureFrame& frame, const RecordSink& sink) {
  auto role_it = state.roles.begin();
  for (std::size_t i = 0; i < frame.entries.size(); ++i, ++role_it) {
    const FeatureEntry& e = frame.entries[i];
    TimestepRecord r;
    r.t = frame.time;
    r.veh = e.state.id;
    r.x = e.state.x;
    r.y = e.state.y;
    r.speed = e.state.speed;
    r.angle = e.state.angle;
    r.degree = e.degree;
    r.role = role_it->second;
    if (r.role == Role::kClusterHead) {
      r.cluster = e.state.id;
      r.dist_ch = 0.0;
    } else if (r.role == Role::kClusterMember) {
      const std::string& ch = state.cluster_of.at(e.state.id);
      const NeighborRelation* rel = frame.relation(i, *frame.find(ch));
      if (rel == nullptr) throw InternalError("CM " + e.state.id + " out of range of its CH");
      r.cluster = ch;
      r.dist_ch = rel->distance;
    }
    sink(r);
  }
}

}  // namespace

RunResult run_simulation(const RunConfig& cfg, const RecordSink& sink,
                         const ProgressSink& progress, std::stop_token cancel) {
  if (cfg.scenario == nullptr) throw ConfigError("run has no scenario");
  cfg.cluster.validate();
  const Scenario& scenario = *cfg.scenario;
  const ValidationReport report = validate_scenario(scenario);
  if (!report.runnable()) throw ConfigError("scenario is not runnable: " + report.errors.front());

  RunResult result;
  MetricsAccumulator metrics;
  ClusterState state;
  const ClusterState* prev = nullptr;
  const std::size_t total = scenario.timesteps.size();

  for (std::size_t k = 0; k < total; ++k) {
    if (cancel.stop_requested()) throw RunCancelled();
    const Timestep& ts = scenario.timesteps[k];

    const FeatureFrame frame = compute_features(ts, cfg.cluster.range, cfg.feature_threads);
    state = step_clustering(prev, frame, cfg.cluster);
    if (const auto violation = check_invariants(state, frame)) {
      throw InternalError("t=" + std::to_string(ts.time) + ": " + *violation);
    }

    if (cfg.emit_report && sink) emit_records(state, frame, sink);
    result.n_records += frame.entries.size();
    metrics.accumulate(state, ts);
    ++result.n_events;
    if (cfg.keep_states) result.states.push_back(state);
    prev = &state;

    if (progress) progress(static_cast<double>(k + 1) / static_cast<double>(total));
  }

  result.series = metrics.series();
  result.summary = metrics.finalize(scenario.nominal_dt);
  return result;
}

}  // namespace cvanet
