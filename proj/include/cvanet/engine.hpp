#pragma once

#include <cstddef>
#include <functional>
#include <stop_token>
#include <vector>

#include "cvanet/clustering.hpp"
#include "cvanet/postproc.hpp"
#include "cvanet/trace.hpp"

namespace cvanet {

struct RunConfig {
  const Scenario* scenario = nullptr;
  ClusterConfig cluster;
  bool emit_report = true;
  /// Worker threads for per-frame feature extraction. Results do not depend on it.
  unsigned feature_threads = 1;
  /// Keep every ClusterState in RunResult::states (tests, small runs).
  bool keep_states = false;
};

struct RunResult {
  std::vector<ClusterState> states;  // empty unless keep_states
  std::vector<SeriesPoint> series;
  MetricsSummary summary;
  std::size_t n_events = 0;
  std::size_t n_records = 0;
};

using RecordSink = std::function<void(const TimestepRecord&)>;
using ProgressSink = std::function<void(double)>;

/// Runs the trace-driven loop: one event per timestep, each computing
/// features, stepping the clustering, streaming one record per vehicle in id
/// order and folding the state into the metrics.
///
/// Throws ConfigError for an invalid config or a scenario with validation
/// errors, RunCancelled when `cancel` is requested before an event, and
/// InternalError if a produced state breaks a clustering invariant (no record
/// of that event is emitted).
RunResult run_simulation(const RunConfig& cfg, const RecordSink& sink,
                         const ProgressSink& progress = {}, std::stop_token cancel = {});

}  // namespace cvanet
