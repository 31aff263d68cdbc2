#include "cvanet/pipeline.hpp"

namespace cvanet {

namespace {
constexpr std::size_t kFlushBytes = std::size_t{1} << 20;
}

RunArtifacts run_pipeline(const Scenario& scenario, const ClusterConfig& cluster,
                          ReportFormat format, const ChunkSink& report_out,
                          const ProgressSink& progress, std::stop_token cancel,
                          unsigned feature_threads) {
  RunConfig cfg;
  cfg.scenario = &scenario;
  cfg.cluster = cluster;
  cfg.feature_threads = feature_threads;
  cfg.emit_report = static_cast<bool>(report_out);

  std::string buffer = report_header(format);
  const auto flush = [&] {
    if (!buffer.empty() && report_out) report_out(buffer);
    buffer.clear();
  };

  RunArtifacts out;
  out.result = run_simulation(
      cfg,
      [&](const TimestepRecord& r) {
        append_report_line(buffer, r, format);
        if (buffer.size() >= kFlushBytes) flush();
      },
      progress, cancel);
  flush();
  out.summary_json = summary_to_json(out.result.summary);
  out.graph_csv = emit_graph_csv(out.result.series);
  return out;
}

}  // namespace cvanet
