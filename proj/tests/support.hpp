#pragma once

// Test-only scenario builders and reference oracles. Nothing here calls into
// the features or clustering code it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cvanet/clustering.hpp"
#include "cvanet/trace.hpp"

namespace cvanet::test {

inline VehicleState vehicle(std::string id, double x, double y, double speed, double angle) {
  return VehicleState{std::move(id), x, y, speed, angle};
}

/// A(0,0,10,90), B(50,0,10,90), C(200,0,20,270), static, at t = 0, 1, ...
inline Scenario trio_scenario(std::size_t steps = 2) {
  Scenario s;
  s.name = "trio";
  for (std::size_t k = 0; k < steps; ++k) {
    s.timesteps.push_back(Timestep{static_cast<double>(k),
                                   {vehicle("A", 0, 0, 10, 90), vehicle("B", 50, 0, 10, 90),
                                    vehicle("C", 200, 0, 20, 270)}});
  }
  s.nominal_dt = 1.0;
  return s;
}

inline std::string trio_csv(std::size_t steps = 2) {
  std::string out = "t,id,x,y,speed,angle\n";
  for (std::size_t k = 0; k < steps; ++k) {
    const std::string t = std::to_string(k);
    out += t + ",A,0,0,10,90\n" + t + ",B,50,0,10,90\n" + t + ",C,200,0,20,270\n";
  }
  return out;
}

inline std::string vehicle_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "v%05zu", i);
  return buf;
}

/// n vehicles uniform in [0, side)^2, speeds in [0, 40), angles in [0, 360).
inline Timestep random_timestep(std::mt19937_64& rng, std::size_t n, double side, double t = 0.0) {
  std::uniform_real_distribution<double> pos(0.0, side);
  std::uniform_real_distribution<double> speed(0.0, 40.0);
  std::uniform_real_distribution<double> angle(0.0, 360.0);
  Timestep ts;
  ts.time = t;
  for (std::size_t i = 0; i < n; ++i) {
    ts.vehicles.push_back(vehicle(vehicle_id(i), pos(rng), pos(rng), speed(rng), angle(rng)));
  }
  return ts;
}

/// Random-walk scenario: vehicles drift, occasionally leave and new ones join.
inline Scenario random_walk_scenario(std::mt19937_64& rng, std::size_t n, std::size_t steps,
                                     double side, double churn = 0.02) {
  std::uniform_real_distribution<double> pos(0.0, side);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 1.0);
  struct Live {
    std::size_t id;
    double x, y, speed, angle;
  };
  std::vector<Live> live;
  std::size_t next_id = 0;
  for (; next_id < n; ++next_id) {
    live.push_back({next_id, pos(rng), pos(rng), 5.0 + 25.0 * unit(rng), 360.0 * unit(rng)});
  }
  Scenario s;
  s.name = "walk";
  for (std::size_t k = 0; k < steps; ++k) {
    Timestep ts;
    ts.time = static_cast<double>(k);
    for (const auto& v : live) {
      ts.vehicles.push_back(vehicle(vehicle_id(v.id), v.x, v.y, v.speed, v.angle));
    }
    std::sort(ts.vehicles.begin(), ts.vehicles.end(),
              [](const VehicleState& a, const VehicleState& b) { return a.id < b.id; });
    s.timesteps.push_back(std::move(ts));

    std::vector<Live> moved;
    for (auto v : live) {
      if (unit(rng) < churn) continue;
      const double rad = v.angle * std::numbers::pi / 180.0;
      v.x += v.speed * std::sin(rad);
      v.y += v.speed * std::cos(rad);
      v.speed = std::clamp(v.speed + jitter(rng), 0.0, 40.0);
      v.angle = std::fmod(v.angle + 10.0 * jitter(rng) + 360.0, 360.0);
      if (v.x < 0 || v.x > side) v.angle = std::fmod(360.0 - v.angle, 360.0);
      if (v.y < 0 || v.y > side) v.angle = std::fmod(540.0 - v.angle, 360.0);
      v.x = std::clamp(v.x, 0.0, side);
      v.y = std::clamp(v.y, 0.0, side);
      moved.push_back(v);
    }
    while (moved.size() < n) {
      moved.push_back({next_id++, pos(rng), pos(rng), 5.0 + 25.0 * unit(rng), 360.0 * unit(rng)});
    }
    live = std::move(moved);
  }
  s.nominal_dt = 1.0;
  return s;
}

inline double oracle_distance(const VehicleState& a, const VehicleState& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y));
}

/// All-pairs neighbor sets: for each vehicle, (index, distance) of every other
/// vehicle within R, ascending index.
inline std::vector<std::vector<std::pair<std::size_t, double>>> brute_force_neighbors(
    const Timestep& ts, double range) {
  const std::size_t n = ts.vehicles.size();
  std::vector<std::vector<std::pair<std::size_t, double>>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = oracle_distance(ts.vehicles[i], ts.vehicles[j]);
      if (d <= range) out[i].emplace_back(j, d);
    }
  }
  return out;
}

struct OracleClustering {
  std::map<std::string, Role> roles;
  std::map<std::string, std::string> cluster_of;
};

/// Straight-line greedy election from scratch: recompute every score by brute
/// force, then repeatedly take the best (score, id) unclustered vehicle that
/// still has an unclustered neighbor and absorb its unclustered neighborhood.
inline OracleClustering greedy_election_oracle(const Timestep& ts, const ClusterConfig& cfg) {
  const auto& vs = ts.vehicles;
  const std::size_t n = vs.size();

  std::vector<double> score(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double ri = vs[i].angle * std::numbers::pi / 180.0;
    const double vxi = vs[i].speed * std::sin(ri);
    const double vyi = vs[i].speed * std::cos(ri);
    std::size_t degree = 0;
    double sum_speed = 0.0;
    double sum_dist = 0.0;
    for (std::size_t j = 0; j < n; ++j) {  // ascending id order
      if (j == i) continue;
      const double d = oracle_distance(vs[i], vs[j]);
      if (d > cfg.range) continue;
      const double rj = vs[j].angle * std::numbers::pi / 180.0;
      const double dvx = vxi - vs[j].speed * std::sin(rj);
      const double dvy = vyi - vs[j].speed * std::cos(rj);
      ++degree;
      sum_speed += std::sqrt(dvx * dvx + dvy * dvy);
      sum_dist += d;
    }
    const double avg_speed = degree ? sum_speed / static_cast<double>(degree) : 0.0;
    const double avg_dist = degree ? sum_dist / static_cast<double>(degree) : 0.0;
    switch (cfg.algorithm) {
      case Algorithm::kLowestId: score[i] = 0.0; break;
      case Algorithm::kHighestDegree: score[i] = -static_cast<double>(degree); break;
      case Algorithm::kMobility:
        score[i] = cfg.w_v * avg_speed + cfg.w_d * avg_dist / cfg.range;
        break;
    }
  }

  OracleClustering out;
  std::vector<std::size_t> unclustered(n);
  for (std::size_t i = 0; i < n; ++i) unclustered[i] = i;

  while (true) {
    std::vector<std::pair<double, std::string>> candidates;
    for (const std::size_t v : unclustered) {
      for (const std::size_t u : unclustered) {
        if (u != v && oracle_distance(vs[v], vs[u]) <= cfg.range) {
          candidates.emplace_back(score[v], vs[v].id);
          break;
        }
      }
    }
    if (candidates.empty()) break;
    std::sort(candidates.begin(), candidates.end());
    const std::string& head_id = candidates.front().second;
    std::size_t head = 0;
    while (vs[head].id != head_id) ++head;

    out.roles[head_id] = Role::kClusterHead;
    std::vector<std::size_t> rest;
    for (const std::size_t u : unclustered) {
      if (u == head) continue;
      if (oracle_distance(vs[head], vs[u]) <= cfg.range) {
        out.roles[vs[u].id] = Role::kClusterMember;
        out.cluster_of[vs[u].id] = head_id;
      } else {
        rest.push_back(u);
      }
    }
    unclustered = std::move(rest);
  }
  for (const std::size_t u : unclustered) out.roles[vs[u].id] = Role::kUnclustered;
  return out;
}

}  // namespace cvanet::test
