#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cvanet/features.hpp"

namespace cvanet {

enum class Role { kClusterHead, kClusterMember, kUnclustered };

/// "CH", "CM" or "UNCLUSTERED".
std::string_view role_name(Role role);

enum class Algorithm { kLowestId, kHighestDegree, kMobility };

std::string_view algorithm_id(Algorithm algorithm);
/// Throws ConfigError listing the valid ids when `id` is not registered.
Algorithm parse_algorithm(std::string_view id);

struct ClusterConfig {
  double range = 0.0;  // m, required
  Algorithm algorithm = Algorithm::kLowestId;
  double w_v = 0.5;  // relative-speed weight (mobility)
  double w_d = 0.5;  // relative-distance weight (mobility)
  int t_idle = 3;    // steps a memberless CH survives
  int t_cont = 3;    // steps a CH tolerates a better CH in range

  /// Throws ConfigError on an out-of-domain field.
  void validate() const;

  friend bool operator==(const ClusterConfig&, const ClusterConfig&) = default;
};

struct AlgorithmParam {
  std::string name;
  std::string type;  // "number" or "integer"
  double default_value = 0.0;
};

struct AlgorithmDescriptor {
  std::string id;
  std::string label;
  std::vector<AlgorithmParam> params;
};

/// The fixed registry: lowest_id, highest_degree, mobility.
const std::vector<AlgorithmDescriptor>& list_algorithms();

/// Election score of a vehicle; lower wins, ties go to the lower id.
///   lowest_id       0
///   highest_degree  -degree
///   mobility        w_v * avg_rel_speed + w_d * avg_rel_dist / R
double score_vehicle(std::string_view id, const FeatureFrame& frame, const ClusterConfig& cfg);
double score_vehicle(std::size_t index, const FeatureFrame& frame, const ClusterConfig& cfg);

struct ClusterState {
  double time = 0.0;
  std::map<std::string, Role> roles;
  std::map<std::string, std::string> cluster_of;             // CM -> CH
  std::map<std::string, std::vector<std::string>> members;   // CH -> sorted CMs
  std::map<std::string, int> idle_count;                     // CH -> steps without members
  std::map<std::string, int> contention;                     // CH -> steps outranked in range

  friend bool operator==(const ClusterState&, const ClusterState&) = default;
};

/// Advances the clustering by one frame. Phases, each in ascending id order:
///   1. drop departed vehicles, orphan members of departed CHs, admit arrivals
///   2. orphan CMs whose CH is gone or out of range
///   3. CH contention; a CH outranked in range for t_cont steps abdicates
///   4. idle demotion of CHs memberless for t_idle steps
///   5. orphans and unclustered vehicles join the nearest CH in range
///   6. greedy (score, id) election among the remaining unclustered vehicles
/// `prev` may be null for the first frame.
ClusterState step_clustering(const ClusterState* prev, const FeatureFrame& frame,
                             const ClusterConfig& cfg);

/// First violated structural invariant of `state` against the frame that
/// produced it, or nullopt. Covers the role partition, cluster_of/members
/// consistency, CM range containment and election soundness.
std::optional<std::string> check_invariants(const ClusterState& state, const FeatureFrame& frame);

}  // namespace cvanet
