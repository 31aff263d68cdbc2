#include "cvanet/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cvanet/error.hpp"

namespace cvanet {

namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

// Scratch per-vehicle state, indexed like FeatureFrame::entries.
struct Working {
  std::vector<Role> role;
  std::vector<std::size_t> head;  // CH index for CMs
  std::vector<int> idle;
  std::vector<int> contention;

  explicit Working(std::size_t n)
      : role(n, Role::kUnclustered), head(n, kNone), idle(n, 0), contention(n, 0) {}

  void make_unclustered(std::size_t i) {
    role[i] = Role::kUnclustered;
    head[i] = kNone;
    idle[i] = 0;
    contention[i] = 0;
  }
};

int lookup_counter(const std::map<std::string, int>& counters, const std::string& id) {
  const auto it = counters.find(id);
  return it == counters.end() ? 0 : it->second;
}

// (score, index) ordering; index order equals id order within a frame.
bool ranks_before(double score_a, std::size_t a, double score_b, std::size_t b) {
  if (score_a != score_b) return score_a < score_b;
  return a < b;
}

}  // namespace

std::string_view role_name(Role role) {
  switch (role) {
    case Role::kClusterHead: return "CH";
    case Role::kClusterMember: return "CM";
    case Role::kUnclustered: return "UNCLUSTERED";
  }
  return "UNCLUSTERED";
}

std::string_view algorithm_id(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kLowestId: return "lowest_id";
    case Algorithm::kHighestDegree: return "highest_degree";
    case Algorithm::kMobility: return "mobility";
  }
  return "lowest_id";
}

Algorithm parse_algorithm(std::string_view id) {
  for (const Algorithm a : {Algorithm::kLowestId, Algorithm::kHighestDegree, Algorithm::kMobility}) {
    if (algorithm_id(a) == id) return a;
  }
  std::string valid;
  for (const auto& d : list_algorithms()) {
    if (!valid.empty()) valid += ", ";
    valid += d.id;
  }
  throw ConfigError("unknown algorithm '" + std::string(id) + "'; valid: " + valid);
}

void ClusterConfig::validate() const {
  if (!(range > 0.0) || !std::isfinite(range)) {
    throw ConfigError("range must be a positive finite number of meters");
  }
  if (!(w_v >= 0.0) || !(w_d >= 0.0) || !std::isfinite(w_v) || !std::isfinite(w_d)) {
    throw ConfigError("weights w_v and w_d must be finite and >= 0");
  }
  if (algorithm == Algorithm::kMobility && !(w_v + w_d > 0.0)) {
    throw ConfigError("mobility requires w_v + w_d > 0");
  }
  if (t_idle < 1) throw ConfigError("t_idle must be >= 1");
  if (t_cont < 1) throw ConfigError("t_cont must be >= 1");
}

const std::vector<AlgorithmDescriptor>& list_algorithms() {
  static const std::vector<AlgorithmDescriptor> registry = [] {
    const std::vector<AlgorithmParam> timers = {{"t_idle", "integer", 3.0},
                                                {"t_cont", "integer", 3.0}};
    std::vector<AlgorithmDescriptor> r;
    r.push_back({"lowest_id", "Lowest ID", timers});
    r.push_back({"highest_degree", "Highest degree", timers});
    AlgorithmDescriptor mobility{"mobility", "Mobility-weighted (relative speed and distance)",
                                 {{"w_v", "number", 0.5}, {"w_d", "number", 0.5}}};
    mobility.params.insert(mobility.params.end(), timers.begin(), timers.end());
    r.push_back(std::move(mobility));
    return r;
  }();
  return registry;
}

double score_vehicle(std::size_t index, const FeatureFrame& frame, const ClusterConfig& cfg) {
  const FeatureEntry& e = frame.entries.at(index);
  switch (cfg.algorithm) {
    case Algorithm::kLowestId: return 0.0;
    case Algorithm::kHighestDegree: return -static_cast<double>(e.degree);
    case Algorithm::kMobility:
      return cfg.w_v * e.avg_rel_speed + cfg.w_d * e.avg_rel_dist / cfg.range;
  }
  throw ConfigError("unknown algorithm");
}

double score_vehicle(std::string_view id, const FeatureFrame& frame, const ClusterConfig& cfg) {
  const auto index = frame.find(id);
  if (!index) throw UsageError("vehicle " + std::string(id) + " not present in frame");
  return score_vehicle(*index, frame, cfg);
}

ClusterState step_clustering(const ClusterState* prev, const FeatureFrame& frame,
                             const ClusterConfig& cfg) {
  cfg.validate();
  if (frame.range != cfg.range) {
    throw ConfigError("feature frame was built with a different transmission range");
  }

  const std::size_t n = frame.entries.size();
  Working w(n);

  // (1) Carry surviving roles forward. Departed vehicles vanish; arrivals and
  // members of departed CHs start unclustered.
  if (prev != nullptr) {
    for (const auto& [id, role] : prev->roles) {
      const auto i = frame.find(id);
      if (!i) continue;
      if (role == Role::kClusterHead) {
        w.role[*i] = Role::kClusterHead;
        w.idle[*i] = lookup_counter(prev->idle_count, id);
        w.contention[*i] = lookup_counter(prev->contention, id);
      }
    }
    for (const auto& [id, ch] : prev->cluster_of) {
      const auto i = frame.find(id);
      if (!i) continue;
      const auto h = frame.find(ch);
      if (h && w.role[*h] == Role::kClusterHead) {
        w.role[*i] = Role::kClusterMember;
        w.head[*i] = *h;
      }
    }
  }

  // (2) Member pruning.
  for (std::size_t i = 0; i < n; ++i) {
    if (w.role[i] != Role::kClusterMember) continue;
    const std::size_t h = w.head[i];
    if (w.role[h] != Role::kClusterHead || frame.relation(i, h) == nullptr) w.make_unclustered(i);
  }

  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) score[i] = score_vehicle(i, frame, cfg);

  // (3) Contention against CHs still holding the role at evaluation time.
  for (std::size_t c = 0; c < n; ++c) {
    if (w.role[c] != Role::kClusterHead) continue;
    bool outranked = false;
    for (const auto& rel : frame.entries[c].neighbors) {
      const std::size_t b = rel.other;
      if (w.role[b] == Role::kClusterHead && ranks_before(score[b], b, score[c], c)) {
        outranked = true;
        break;
      }
    }
    w.contention[c] = outranked ? w.contention[c] + 1 : 0;
    if (w.contention[c] >= cfg.t_cont) {
      for (const auto& rel : frame.entries[c].neighbors) {
        if (w.role[rel.other] == Role::kClusterMember && w.head[rel.other] == c) {
          w.make_unclustered(rel.other);
        }
      }
      w.make_unclustered(c);
    }
  }

  // (4) Idle demotion.
  std::vector<std::size_t> member_count(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (w.role[i] == Role::kClusterMember) ++member_count[w.head[i]];
  }
  for (std::size_t c = 0; c < n; ++c) {
    if (w.role[c] != Role::kClusterHead) continue;
    w.idle[c] = member_count[c] == 0 ? w.idle[c] + 1 : 0;
    if (w.idle[c] >= cfg.t_idle) w.make_unclustered(c);
  }

  // (5) Re-affiliation to the nearest surviving CH.
  for (std::size_t i = 0; i < n; ++i) {
    if (w.role[i] != Role::kUnclustered) continue;
    std::size_t best = kNone;
    double best_dist = 0.0;
    for (const auto& rel : frame.entries[i].neighbors) {
      if (w.role[rel.other] != Role::kClusterHead) continue;
      // Neighbors are visited in ascending index, so strict < keeps the lower id on ties.
      if (best == kNone || rel.distance < best_dist) {
        best = rel.other;
        best_dist = rel.distance;
      }
    }
    if (best != kNone) {
      w.role[i] = Role::kClusterMember;
      w.head[i] = best;
      w.idle[best] = 0;
    }
  }

  // (6) Greedy election. Eligibility only ever shrinks, so one pass in
  // (score, id) order picks the same heads as repeatedly taking the best
  // eligible vehicle.
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    if (w.role[i] == Role::kUnclustered) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ranks_before(score[a], a, score[b], b);
  });
  for (const std::size_t v : order) {
    if (w.role[v] != Role::kUnclustered) continue;
    const auto& nbrs = frame.entries[v].neighbors;
    const bool eligible = std::any_of(nbrs.begin(), nbrs.end(), [&](const NeighborRelation& r) {
      return w.role[r.other] == Role::kUnclustered;
    });
    if (!eligible) continue;
    w.role[v] = Role::kClusterHead;
    w.idle[v] = 0;
    w.contention[v] = 0;
    for (const auto& rel : nbrs) {
      if (w.role[rel.other] == Role::kUnclustered) {
        w.role[rel.other] = Role::kClusterMember;
        w.head[rel.other] = v;
      }
    }
  }

  ClusterState out;
  out.time = frame.time;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& id = frame.id(i);
    out.roles.emplace_hint(out.roles.end(), id, w.role[i]);
    if (w.role[i] == Role::kClusterHead) {
      out.members.emplace_hint(out.members.end(), id, std::vector<std::string>{});
      out.idle_count.emplace_hint(out.idle_count.end(), id, w.idle[i]);
      out.contention.emplace_hint(out.contention.end(), id, w.contention[i]);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (w.role[i] != Role::kClusterMember) continue;
    const std::string& ch = frame.id(w.head[i]);
    out.cluster_of.emplace_hint(out.cluster_of.end(), frame.id(i), ch);
    out.members[ch].push_back(frame.id(i));
  }
  return out;
}

std::optional<std::string> check_invariants(const ClusterState& state, const FeatureFrame& frame) {
  if (state.roles.size() != frame.entries.size()) {
    return "role map covers " + std::to_string(state.roles.size()) + " vehicles, frame has " +
           std::to_string(frame.entries.size());
  }
  // Both the role map and the frame are ordered by id, so they zip.
  std::vector<Role> role(frame.entries.size());
  std::size_t n_cm = 0;
  std::size_t n_ch = 0;
  std::size_t i = 0;
  for (const auto& [id, r] : state.roles) {
    if (frame.id(i) != id) return "role for absent vehicle " + id;
    role[i++] = r;
    if (r == Role::kClusterMember) ++n_cm;
    if (r == Role::kClusterHead) ++n_ch;
  }
  if (state.cluster_of.size() != n_cm) return "cluster_of does not match the CM set";
  if (state.members.size() != n_ch) return "members does not match the CH set";
  if (state.idle_count.size() != n_ch || state.contention.size() != n_ch) {
    return "timer maps do not match the CH set";
  }

  std::size_t listed = 0;
  for (const auto& [ch, list] : state.members) {
    const auto h = frame.find(ch);
    if (!h || role[*h] != Role::kClusterHead) return "members key " + ch + " is not a CH";
    if (!std::is_sorted(list.begin(), list.end())) return "members of " + ch + " not sorted";
    for (const auto& m : list) {
      const auto c = state.cluster_of.find(m);
      if (c == state.cluster_of.end() || c->second != ch) return "members/cluster_of mismatch at " + m;
      ++listed;
    }
  }
  if (listed != n_cm) return "members is not the inverse of cluster_of";

  for (const auto& [m, ch] : state.cluster_of) {
    const auto mi = frame.find(m);
    const auto hi = frame.find(ch);
    if (!mi || role[*mi] != Role::kClusterMember) return "cluster_of key " + m + " is not a CM";
    if (!hi || role[*hi] != Role::kClusterHead) return "cluster_of value " + ch + " is not a CH";
    if (!(distance(frame.entries[*mi].state, frame.entries[*hi].state) <= frame.range)) {
      return "CM " + m + " is farther than R from CH " + ch;
    }
  }

  for (std::size_t v = 0; v < frame.entries.size(); ++v) {
    if (role[v] != Role::kUnclustered) continue;
    for (const auto& rel : frame.entries[v].neighbors) {
      if (role[rel.other] == Role::kUnclustered) {
        return "unclustered vehicles " + frame.id(v) + " and " + frame.id(rel.other) + " are in range";
      }
    }
  }
  return std::nullopt;
}

}  // namespace cvanet
