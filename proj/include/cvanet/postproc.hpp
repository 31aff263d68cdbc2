#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cvanet/clustering.hpp"
#include "cvanet/trace.hpp"

namespace cvanet {

/// One report row: a vehicle's state and role at one event.
struct TimestepRecord {
  double t = 0.0;
  std::string veh;
  double x = 0.0;
  double y = 0.0;
  double speed = 0.0;
  double angle = 0.0;
  std::size_t degree = 0;
  Role role = Role::kUnclustered;
  std::optional<std::string> cluster;  // own id for a CH
  std::optional<double> dist_ch;       // 0 for a CH

  friend bool operator==(const TimestepRecord&, const TimestepRecord&) = default;
};

struct SeriesPoint {
  double t = 0.0;
  std::size_t n_vehicles = 0;
  std::size_t n_clusters = 0;
  std::size_t n_cm = 0;
  std::size_t n_unclustered = 0;

  friend bool operator==(const SeriesPoint&, const SeriesPoint&) = default;
};

enum class IntervalKind { kClusterHead, kClusterMember };

/// A maximal run of consecutive steps in one role (and, for CMs, under one CH).
struct IntervalStat {
  std::string veh;
  IntervalKind kind = IntervalKind::kClusterHead;
  double start_t = 0.0;
  std::size_t n_steps = 0;
  double duration = 0.0;  // n_steps * nominal_dt
  std::string ch;         // CM intervals only

  friend bool operator==(const IntervalStat&, const IntervalStat&) = default;
};

struct MetricsSummary {
  double avg_ch_duration_s = 0.0;
  double avg_cm_duration_s = 0.0;
  double avg_ch_changes_per_vehicle = 0.0;
  double avg_num_clusters = 0.0;
  double avg_num_cm = 0.0;
  double avg_num_unclustered = 0.0;
  std::size_t n_timesteps = 0;
  std::size_t n_vehicles = 0;
  double nominal_dt = 1.0;

  friend bool operator==(const MetricsSummary&, const MetricsSummary&) = default;
};

/// Folds a run's ClusterStates into the series and stability intervals.
/// Single writer; states must arrive in strictly increasing time.
class MetricsAccumulator {
 public:
  /// Throws UsageError when `state` is not later than the previous one or
  /// does not describe `ts`.
  void accumulate(const ClusterState& state, const Timestep& ts);

  /// Throws UsageError when nothing has been accumulated.
  MetricsSummary finalize(double nominal_dt) const;

  const std::vector<SeriesPoint>& series() const { return series_; }
  /// Closed and still-open intervals, closed ones first in closing order.
  std::vector<IntervalStat> intervals(double nominal_dt) const;
  /// Number of steps after the first where a vehicle became CH.
  std::size_t ch_acquisitions() const { return ch_acquisitions_; }

 private:
  struct OpenInterval {
    IntervalKind kind;
    double start_t;
    std::size_t n_steps;
    std::string ch;
  };

  void close(std::map<std::string, OpenInterval>::iterator it);

  std::vector<SeriesPoint> series_;
  std::map<std::string, OpenInterval> open_;
  std::vector<IntervalStat> closed_;
  std::set<std::string> seen_;
  std::size_t ch_acquisitions_ = 0;
};

enum class ReportFormat { kCsv, kJsonl };

/// Header line (with newline) for CSV, empty for JSONL.
std::string report_header(ReportFormat format);
void append_report_line(std::string& out, const TimestepRecord& record, ReportFormat format);
/// Whole report in (t, veh) order.
std::string emit_report(std::span<const TimestepRecord> records, ReportFormat format);

std::string emit_graph_csv(std::span<const SeriesPoint> series);

/// Flat JSON object with exactly the MetricsSummary field names.
std::string summary_to_json(const MetricsSummary& summary);

}  // namespace cvanet
