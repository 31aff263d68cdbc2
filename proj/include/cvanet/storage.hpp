#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cvanet/clustering.hpp"
#include "cvanet/trace.hpp"

namespace cvanet {

/// Upload rejected because the scenario parsed but failed validation.
class ScenarioRejected : public std::runtime_error {
 public:
  explicit ScenarioRejected(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

struct ScenarioRecord {
  std::string id;
  std::string name;
  std::string created_at;  // ISO-8601 UTC, microseconds
  TraceFormat format = TraceFormat::kCsv;
  std::string body;  // empty in list_scenarios() results
  ValidationReport validation;
};

enum class RunStatus { kQueued, kRunning, kDone, kFailed, kCancelled };

std::string_view status_name(RunStatus status);
std::optional<RunStatus> parse_status(std::string_view name);
bool is_terminal(RunStatus status);

struct RunRecord {
  std::string id;
  std::string scenario_id;
  ClusterConfig config;
  RunStatus status = RunStatus::kQueued;
  double progress = 0.0;
  std::string error;
  std::string created_at;
};

/// Appends report bytes for a running run. Closed by attach_artifacts or
/// discarded with the run.
class ReportWriter {
 public:
  explicit ReportWriter(const std::filesystem::path& path);
  void append(std::string_view bytes);
  void close();

 private:
  std::ofstream out_;
};

/// Embedded file-backed store:
///
///   <root>/scenarios/<id>/body        uploaded bytes
///   <root>/scenarios/<id>/meta.json
///   <root>/runs/<id>/run.json         config + status, replaced atomically
///   <root>/runs/<id>/summary.json     present iff status is done
///   <root>/runs/<id>/graph.csv         "
///   <root>/runs/<id>/report.jsonl      " (report.jsonl.part while running)
///
/// Opening a store marks runs left in `running` by a previous process as
/// failed ("interrupted"). All methods are thread-safe; status transitions are
/// serialized by one registry lock.
class Store {
 public:
  static constexpr std::string_view kInterrupted = "interrupted";

  explicit Store(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  /// Parses and validates before persisting. Throws ParseError or
  /// ScenarioRejected.
  ScenarioRecord put_scenario(std::string name, std::string body, TraceFormat format);
  ScenarioRecord get_scenario(const std::string& id) const;
  /// Newest first; bodies are not loaded.
  std::vector<ScenarioRecord> list_scenarios() const;
  Scenario load_scenario(const std::string& id) const;

  RunRecord create_run(const std::string& scenario_id, const ClusterConfig& config);
  /// Legal moves: queued -> running | cancelled, running -> failed | cancelled.
  /// `done` is reached only through attach_artifacts. Throws UsageError otherwise.
  RunRecord update_run(const std::string& id, RunStatus status, std::string error = {});
  /// Progress of a running run; persisted every tenth.
  void set_progress(const std::string& id, double progress);
  RunRecord get_run(const std::string& id) const;
  /// Newest first.
  std::vector<RunRecord> list_runs() const;

  /// Opens the run's partial report stream. The run must be running.
  ReportWriter open_report(const std::string& id);
  /// running -> done: stores summary and graph, promotes the partial report.
  RunRecord attach_artifacts(const std::string& id, std::string_view summary_json,
                             std::string_view graph_csv);

  /// Artifact bytes of a done run ("summary.json" or "graph.csv").
  /// Throws NotFound or UsageError (not done).
  std::string read_artifact(const std::string& id, std::string_view name) const;
  /// Report records [offset, offset + limit) by record index.
  std::string read_report(const std::string& id, std::size_t offset = 0,
                          std::optional<std::size_t> limit = std::nullopt) const;

 private:
  std::filesystem::path run_dir(const std::string& id) const;
  std::filesystem::path scenario_dir(const std::string& id) const;
  std::string next_timestamp();
  void persist_run(const RunRecord& run) const;
  void discard_artifacts(const std::string& id) const;
  void recover();
  const RunRecord& require_run(const std::string& id) const;
  void require_done(const std::string& id) const;

  std::filesystem::path root_;
  mutable std::mutex mutex_;
  std::map<std::string, RunRecord> runs_;
  std::map<std::string, ScenarioRecord> scenarios_;  // metadata only
  std::map<std::string, int> persisted_tenths_;
  std::int64_t last_micros_ = 0;
};

/// 16 random bytes as lowercase hex.
std::string random_token();

}  // namespace cvanet
