#pragma once

#include <functional>
#include <stop_token>
#include <string>
#include <string_view>

#include "cvanet/engine.hpp"
#include "cvanet/postproc.hpp"

namespace cvanet {

/// The artifact bytes of one finished run. The report itself is streamed.
struct RunArtifacts {
  std::string summary_json;
  std::string graph_csv;
  RunResult result;
};

using ChunkSink = std::function<void(std::string_view)>;

/// Runs a scenario and renders every output artifact. The CLI and the service
/// both go through here, so identical inputs give identical bytes.
RunArtifacts run_pipeline(const Scenario& scenario, const ClusterConfig& cluster,
                          ReportFormat format, const ChunkSink& report_out,
                          const ProgressSink& progress = {}, std::stop_token cancel = {},
                          unsigned feature_threads = 1);

}  // namespace cvanet
