#pragma once

#include <cstddef>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cvanet/trace.hpp"

namespace cvanet {

struct VelocityVector {
  double vx = 0.0;  // east component, m/s
  double vy = 0.0;  // north component, m/s
};

/// Compass heading (0 = north, clockwise) to a planar velocity vector.
VelocityVector heading_to_velocity(double speed, double angle_deg);

/// One in-range peer of a vehicle. `other` indexes FeatureFrame::entries;
/// entries are sorted by id, so ascending `other` is ascending id order.
struct NeighborRelation {
  std::size_t other = 0;
  double distance = 0.0;      // m, <= range
  double rel_speed = 0.0;     // |v_i - v_j|, m/s
  double heading_diff = 0.0;  // degrees in [0, 180]
};

struct FeatureEntry {
  VehicleState state;
  VelocityVector velocity;
  std::vector<NeighborRelation> neighbors;  // ascending `other`
  std::size_t degree = 0;
  double avg_rel_speed = 0.0;  // 0 when isolated
  double avg_rel_dist = 0.0;   // 0 when isolated
};

struct IdHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
};

struct FeatureFrame {
  double time = 0.0;
  double range = 0.0;
  std::vector<FeatureEntry> entries;  // ascending id
  /// id -> entry index, filled by compute_features. find() falls back to a
  /// binary search when it does not cover the entries.
  std::unordered_map<std::string, std::size_t, IdHash, std::equal_to<>> index;

  const std::string& id(std::size_t index) const { return entries[index].state.id; }
  std::optional<std::size_t> find(std::string_view id) const;
  /// The relation from `from` to `to`, or nullptr when out of range.
  const NeighborRelation* relation(std::size_t from, std::size_t to) const;
};

/// Uniform grid with cell side R over one timestep's positions. A query scans
/// the 3x3 block around the vehicle's cell and keeps candidates whose exact
/// Euclidean distance is <= R.
class NeighborGrid {
 public:
  NeighborGrid(std::span<const VehicleState> vehicles, double range);

  /// In-range vehicle indices (self excluded), ascending.
  std::vector<std::size_t> query(std::size_t index) const;
  /// Same as query(index), reusing `out`'s storage.
  void query(std::size_t index, std::vector<std::size_t>& out) const;
  /// (index, distance) pairs, ascending index.
  void query(std::size_t index, std::vector<std::pair<std::size_t, double>>& out) const;

  /// Calls fn(i, j, distance) once for every unordered in-range pair.
  template <typename Fn>
  void for_each_pair(Fn&& fn) const;

  /// Cell coordinates of a position.
  std::pair<std::int64_t, std::int64_t> cell_of(double x, double y) const;

  double range() const { return range_; }

 private:
  static std::uint64_t key(std::int64_t cx, std::int64_t cy);
  static bool in_grid(std::int64_t cx, std::int64_t cy);

  struct Slot {
    double x;
    double y;
    std::size_t index;
  };

  std::span<const VehicleState> vehicles_;
  double range_;
  double surely_out_;  // squared distances above this are out of range without a sqrt
  std::vector<Slot> slots_;  // grouped by cell, ascending index within a cell
  std::unordered_map<std::uint64_t, std::pair<std::size_t, std::size_t>> cells_;  // [begin, end) of slots_
};

template <typename Fn>
void NeighborGrid::for_each_pair(Fn&& fn) const {
  const auto visit = [&](std::size_t a_begin, std::size_t a_end, std::size_t b_begin, std::size_t b_end,
                         bool same) {
    for (std::size_t a = a_begin; a < a_end; ++a) {
      const Slot& p = slots_[a];
      for (std::size_t b = same ? a + 1 : b_begin; b < b_end; ++b) {
        const Slot& q = slots_[b];
        const double dx = p.x - q.x;
        const double dy = p.y - q.y;
        const double d2 = dx * dx + dy * dy;
        if (d2 > surely_out_) continue;
        const double d = std::sqrt(d2);
        if (d <= range_) fn(p.index, q.index, d);
      }
    }
  };
  // Each cell meets itself and the four neighbors ahead of it, so every
  // unordered pair of adjacent cells is visited exactly once.
  constexpr std::int64_t kAhead[4][2] = {{1, -1}, {1, 0}, {1, 1}, {0, 1}};
  std::size_t begin = 0;
  while (begin < slots_.size()) {
    const Slot& first = slots_[begin];
    const auto [cx, cy] = cell_of(first.x, first.y);
    const auto [cb, ce] = cells_.at(key(cx, cy));
    visit(cb, ce, cb, ce, true);
    for (const auto& off : kAhead) {
      const std::int64_t nx = cx + off[0];
      const std::int64_t ny = cy + off[1];
      if (!in_grid(nx, ny)) continue;
      const auto it = cells_.find(key(nx, ny));
      if (it != cells_.end()) visit(cb, ce, it->second.first, it->second.second, false);
    }
    begin = ce;
  }
}

/// Euclidean distance between two states.
double distance(const VehicleState& a, const VehicleState& b);

/// Builds the per-vehicle features of one timestep. `threads` > 1 splits the
/// per-vehicle work; output is identical for every thread count.
FeatureFrame compute_features(const Timestep& ts, double range, unsigned threads = 1);

}  // namespace cvanet
