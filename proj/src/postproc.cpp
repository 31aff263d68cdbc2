#include "cvanet/postproc.hpp"

#include <algorithm>

#include "cvanet/error.hpp"
#include "cvanet/format.hpp"

namespace cvanet {

namespace {

void append_csv_field(std::string& out, std::string_view text) {
  if (text.find_first_of(",\"\r\n") == std::string_view::npos) {
    out += text;
    return;
  }
  out.push_back('"');
  for (const char c : text) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

double mean_steps(const std::vector<IntervalStat>& all, IntervalKind kind, double dt) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& iv : all) {
    if (iv.kind != kind) continue;
    total += static_cast<double>(iv.n_steps) * dt;
    ++count;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

}  // namespace

void MetricsAccumulator::close(std::map<std::string, OpenInterval>::iterator it) {
  const OpenInterval& o = it->second;
  closed_.push_back(IntervalStat{it->first, o.kind, o.start_t, o.n_steps, 0.0, o.ch});
  open_.erase(it);
}

void MetricsAccumulator::accumulate(const ClusterState& state, const Timestep& ts) {
  if (!series_.empty() && !(ts.time > series_.back().t)) {
    throw UsageError("states must be accumulated in strictly increasing time order");
  }
  if (state.time != ts.time || state.roles.size() != ts.vehicles.size()) {
    throw UsageError("cluster state does not describe the given timestep");
  }
  const bool first_step = series_.empty();

  SeriesPoint point;
  point.t = ts.time;
  point.n_vehicles = ts.vehicles.size();

  // Close intervals of vehicles that left.
  for (auto it = open_.begin(); it != open_.end();) {
    auto next = std::next(it);
    if (!state.roles.contains(it->first)) close(it);
    it = next;
  }

  for (const auto& [id, role] : state.roles) {
    seen_.insert(id);
    auto open = open_.find(id);
    switch (role) {
      case Role::kUnclustered:
        ++point.n_unclustered;
        if (open != open_.end()) close(open);
        break;
      case Role::kClusterHead:
        ++point.n_clusters;
        if (open != open_.end() && open->second.kind == IntervalKind::kClusterHead) {
          ++open->second.n_steps;
          break;
        }
        if (open != open_.end()) close(open);
        if (!first_step) ++ch_acquisitions_;
        open_.emplace(id, OpenInterval{IntervalKind::kClusterHead, ts.time, 1, {}});
        break;
      case Role::kClusterMember: {
        ++point.n_cm;
        const auto ch = state.cluster_of.find(id);
        if (ch == state.cluster_of.end()) throw UsageError("CM " + id + " has no cluster");
        if (open != open_.end() && open->second.kind == IntervalKind::kClusterMember &&
            open->second.ch == ch->second) {
          ++open->second.n_steps;
          break;
        }
        if (open != open_.end()) close(open);
        open_.emplace(id, OpenInterval{IntervalKind::kClusterMember, ts.time, 1, ch->second});
        break;
      }
    }
  }
  series_.push_back(point);
}

std::vector<IntervalStat> MetricsAccumulator::intervals(double nominal_dt) const {
  std::vector<IntervalStat> all = closed_;
  for (const auto& [id, o] : open_) all.push_back(IntervalStat{id, o.kind, o.start_t, o.n_steps, 0.0, o.ch});
  for (auto& iv : all) iv.duration = static_cast<double>(iv.n_steps) * nominal_dt;
  return all;
}

MetricsSummary MetricsAccumulator::finalize(double nominal_dt) const {
  if (series_.empty()) throw UsageError("cannot finalize metrics without any accumulated state");

  const auto all = intervals(nominal_dt);
  MetricsSummary s;
  s.avg_ch_duration_s = mean_steps(all, IntervalKind::kClusterHead, nominal_dt);
  s.avg_cm_duration_s = mean_steps(all, IntervalKind::kClusterMember, nominal_dt);
  s.avg_ch_changes_per_vehicle =
      seen_.empty() ? 0.0 : static_cast<double>(ch_acquisitions_) / static_cast<double>(seen_.size());

  double clusters = 0.0, cms = 0.0, unclustered = 0.0;
  for (const auto& p : series_) {
    clusters += static_cast<double>(p.n_clusters);
    cms += static_cast<double>(p.n_cm);
    unclustered += static_cast<double>(p.n_unclustered);
  }
  const double count = static_cast<double>(series_.size());
  s.avg_num_clusters = clusters / count;
  s.avg_num_cm = cms / count;
  s.avg_num_unclustered = unclustered / count;
  s.n_timesteps = series_.size();
  s.n_vehicles = seen_.size();
  s.nominal_dt = nominal_dt;
  return s;
}

std::string report_header(ReportFormat format) {
  if (format == ReportFormat::kJsonl) return {};
  return "t,veh,x,y,speed,angle,degree,role,cluster,dist_ch\n";
}

void append_report_line(std::string& out, const TimestepRecord& r, ReportFormat format) {
  if (format == ReportFormat::kCsv) {
    append_number(out, r.t);
    out.push_back(',');
    append_csv_field(out, r.veh);
    for (const double v : {r.x, r.y, r.speed, r.angle}) {
      out.push_back(',');
      append_number(out, v);
    }
    out.push_back(',');
    out += std::to_string(r.degree);
    out.push_back(',');
    out += role_name(r.role);
    out.push_back(',');
    if (r.cluster) append_csv_field(out, *r.cluster);
    out.push_back(',');
    if (r.dist_ch) append_number(out, *r.dist_ch);
    out.push_back('\n');
    return;
  }

  out += "{\"t\":";
  append_number(out, r.t);
  out += ",\"veh\":";
  append_json_string(out, r.veh);
  out += ",\"x\":";
  append_number(out, r.x);
  out += ",\"y\":";
  append_number(out, r.y);
  out += ",\"speed\":";
  append_number(out, r.speed);
  out += ",\"angle\":";
  append_number(out, r.angle);
  out += ",\"degree\":";
  out += std::to_string(r.degree);
  out += ",\"role\":\"";
  out += role_name(r.role);
  out += "\",\"cluster\":";
  if (r.cluster) {
    append_json_string(out, *r.cluster);
  } else {
    out += "null";
  }
  out += ",\"dist_ch\":";
  if (r.dist_ch) {
    append_number(out, *r.dist_ch);
  } else {
    out += "null";
  }
  out += "}\n";
}

std::string emit_report(std::span<const TimestepRecord> records, ReportFormat format) {
  std::vector<const TimestepRecord*> ordered;
  ordered.reserve(records.size());
  for (const auto& r : records) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
    if (a->t != b->t) return a->t < b->t;
    return a->veh < b->veh;
  });
  std::string out = report_header(format);
  for (const auto* r : ordered) append_report_line(out, *r, format);
  return out;
}

std::string emit_graph_csv(std::span<const SeriesPoint> series) {
  std::string out = "t,n_vehicles,n_clusters,n_cm,n_unclustered\n";
  for (const auto& p : series) {
    append_number(out, p.t);
    for (const std::size_t v : {p.n_vehicles, p.n_clusters, p.n_cm, p.n_unclustered}) {
      out.push_back(',');
      out += std::to_string(v);
    }
    out.push_back('\n');
  }
  return out;
}

std::string summary_to_json(const MetricsSummary& s) {
  std::string out = "{\n";
  const auto field = [&out](std::string_view key, double value, bool last = false) {
    out += "  \"";
    out += key;
    out += "\": ";
    append_number(out, value);
    out += last ? "\n" : ",\n";
  };
  field("avg_ch_duration_s", s.avg_ch_duration_s);
  field("avg_cm_duration_s", s.avg_cm_duration_s);
  field("avg_ch_changes_per_vehicle", s.avg_ch_changes_per_vehicle);
  field("avg_num_clusters", s.avg_num_clusters);
  field("avg_num_cm", s.avg_num_cm);
  field("avg_num_unclustered", s.avg_num_unclustered);
  field("n_timesteps", static_cast<double>(s.n_timesteps));
  field("n_vehicles", static_cast<double>(s.n_vehicles));
  field("nominal_dt", s.nominal_dt, true);
  out += "}\n";
  return out;
}

}  // namespace cvanet
