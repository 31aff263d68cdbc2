#include "cvanet/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "cvanet/error.hpp"

namespace cvanet {

namespace {

// Cell coordinates are clamped so they pack into 32 bits each. Clamping is
// monotone, so two positions within R still land in cells at most one apart.
constexpr std::int64_t kCellLimit = std::int64_t{1} << 30;

std::int64_t cell_coord(double v, double range) {
  const double c = std::floor(v / range);
  if (!(c > -static_cast<double>(kCellLimit))) return -kCellLimit;
  if (c > static_cast<double>(kCellLimit)) return kCellLimit;
  return static_cast<std::int64_t>(c);
}

// Completes an entry whose sorted neighbors hold only `other` and `distance`.
void finish_entry(const FeatureFrame& frame, FeatureEntry& entry) {
  auto& nbrs = entry.neighbors;
  double sum_speed = 0.0;
  double sum_dist = 0.0;
  for (NeighborRelation& rel : nbrs) {
    const FeatureEntry& peer = frame.entries[rel.other];
    const double dvx = entry.velocity.vx - peer.velocity.vx;
    const double dvy = entry.velocity.vy - peer.velocity.vy;
    rel.rel_speed = std::sqrt(dvx * dvx + dvy * dvy);
    const double diff = std::abs(entry.state.angle - peer.state.angle);
    rel.heading_diff = std::min(diff, 360.0 - diff);
    sum_speed += rel.rel_speed;
    sum_dist += rel.distance;
  }
  entry.degree = nbrs.size();
  if (entry.degree > 0) {
    entry.avg_rel_speed = sum_speed / static_cast<double>(entry.degree);
    entry.avg_rel_dist = sum_dist / static_cast<double>(entry.degree);
  } else {
    entry.avg_rel_speed = 0.0;
    entry.avg_rel_dist = 0.0;
  }
}

}  // namespace

VelocityVector heading_to_velocity(double speed, double angle_deg) {
  const double rad = angle_deg * (std::numbers::pi / 180.0);
  return {speed * std::sin(rad), speed * std::cos(rad)};
}

double distance(const VehicleState& a, const VehicleState& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

std::optional<std::size_t> FeatureFrame::find(std::string_view id) const {
  if (index.size() == entries.size()) {
    const auto it = index.find(id);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
  const auto it = std::lower_bound(entries.begin(), entries.end(), id,
                                   [](const FeatureEntry& e, std::string_view key) {
                                     return std::string_view(e.state.id) < key;
                                   });
  if (it == entries.end() || it->state.id != id) return std::nullopt;
  return static_cast<std::size_t>(it - entries.begin());
}

const NeighborRelation* FeatureFrame::relation(std::size_t from, std::size_t to) const {
  const auto& list = entries[from].neighbors;
  const auto it = std::lower_bound(
      list.begin(), list.end(), to,
      [](const NeighborRelation& r, std::size_t key) { return r.other < key; });
  if (it == list.end() || it->other != to) return nullptr;
  return &*it;
}

NeighborGrid::NeighborGrid(std::span<const VehicleState> vehicles, double range)
    : vehicles_(vehicles), range_(range), surely_out_(range * range * (1.0 + 1e-9)) {
  if (!(range > 0.0) || !std::isfinite(range)) {
    throw ConfigError("transmission range must be a positive finite number");
  }
  std::vector<std::pair<std::uint64_t, std::size_t>> keyed(vehicles.size());
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const auto [cx, cy] = cell_of(vehicles[i].x, vehicles[i].y);
    keyed[i] = {key(cx, cy), i};
  }
  std::sort(keyed.begin(), keyed.end());
  slots_.reserve(keyed.size());
  cells_.reserve(keyed.size());
  for (std::size_t k = 0; k < keyed.size(); ++k) {
    const std::size_t i = keyed[k].second;
    slots_.push_back({vehicles[i].x, vehicles[i].y, i});
    auto [it, fresh] = cells_.try_emplace(keyed[k].first, k, k + 1);
    if (!fresh) it->second.second = k + 1;
  }
}

std::pair<std::int64_t, std::int64_t> NeighborGrid::cell_of(double x, double y) const {
  return {cell_coord(x, range_), cell_coord(y, range_)};
}

std::uint64_t NeighborGrid::key(std::int64_t cx, std::int64_t cy) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(cx)) << 32) |
         static_cast<std::uint32_t>(cy);
}

bool NeighborGrid::in_grid(std::int64_t cx, std::int64_t cy) {
  return cx >= -kCellLimit && cx <= kCellLimit && cy >= -kCellLimit && cy <= kCellLimit;
}

std::vector<std::size_t> NeighborGrid::query(std::size_t index) const {
  std::vector<std::size_t> out;
  query(index, out);
  return out;
}

void NeighborGrid::query(std::size_t index, std::vector<std::size_t>& out) const {
  std::vector<std::pair<std::size_t, double>> found;
  query(index, found);
  out.clear();
  for (const auto& [j, d] : found) out.push_back(j);
}

void NeighborGrid::query(std::size_t index, std::vector<std::pair<std::size_t, double>>& out) const {
  out.clear();
  const VehicleState& self = vehicles_[index];
  const auto [cx, cy] = cell_of(self.x, self.y);
  for (std::int64_t dx = -1; dx <= 1; ++dx) {
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
      const std::int64_t nx = cx + dx;
      const std::int64_t ny = cy + dy;
      if (!in_grid(nx, ny)) continue;
      const auto it = cells_.find(key(nx, ny));
      if (it == cells_.end()) continue;
      for (std::size_t k = it->second.first; k < it->second.second; ++k) {
        const Slot& slot = slots_[k];
        const double ddx = self.x - slot.x;
        const double ddy = self.y - slot.y;
        const double d2 = ddx * ddx + ddy * ddy;
        if (d2 > surely_out_ || slot.index == index) continue;
        const double d = std::sqrt(d2);
        if (d <= range_) out.emplace_back(slot.index, d);
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
}

FeatureFrame compute_features(const Timestep& ts, double range, unsigned threads) {
  NeighborGrid grid(ts.vehicles, range);

  FeatureFrame frame;
  frame.time = ts.time;
  frame.range = range;
  frame.entries.resize(ts.vehicles.size());
  for (std::size_t i = 0; i < ts.vehicles.size(); ++i) {
    FeatureEntry& e = frame.entries[i];
    e.state = ts.vehicles[i];
    e.velocity = heading_to_velocity(e.state.speed, e.state.angle);
  }
  frame.index.reserve(frame.entries.size());
  for (std::size_t i = 0; i < frame.entries.size(); ++i) frame.index.emplace(frame.entries[i].state.id, i);

  // Pairs are found once, sequentially; only the per-entry completion is split.
  struct Pair {
    std::size_t i;
    std::size_t j;
    double d;
  };
  const std::size_t count = frame.entries.size();
  // Scratch reused across frames of similar size.
  thread_local std::vector<Pair> pairs;
  thread_local std::vector<std::size_t> start;
  thread_local std::vector<std::pair<std::size_t, double>> around;
  thread_local std::vector<std::size_t> fill;
  pairs.clear();
  start.assign(count + 1, 0);
  grid.for_each_pair([&](std::size_t i, std::size_t j, double d) {
    pairs.push_back({i, j, d});
    ++start[i + 1];
    ++start[j + 1];
  });
  for (std::size_t i = 0; i < count; ++i) start[i + 1] += start[i];

  // Bucket b of `around` holds b's neighbors in arbitrary order. Walking the
  // buckets in ascending b and appending b to each neighbor's list leaves
  // every list in ascending order without a sort.
  around.resize(start[count]);
  fill.assign(start.begin(), start.end() - 1);
  for (const Pair& p : pairs) {
    around[fill[p.i]++] = {p.j, p.d};
    around[fill[p.j]++] = {p.i, p.d};
  }
  for (std::size_t i = 0; i < count; ++i) frame.entries[i].neighbors.reserve(start[i + 1] - start[i]);
  for (std::size_t b = 0; b < count; ++b) {
    for (std::size_t k = start[b]; k < start[b + 1]; ++k) {
      frame.entries[around[k].first].neighbors.push_back({b, around[k].second, 0.0, 0.0});
    }
  }

  const std::size_t n = frame.entries.size();
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (auto& e : frame.entries) finish_entry(frame, e);
    return frame;
  }

  // Each worker owns a contiguous slice of entries; peers are only read.
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    pool.emplace_back([&frame, begin, end] {
      for (std::size_t i = begin; i < end; ++i) finish_entry(frame, frame.entries[i]);
    });
  }
  pool.clear();
  return frame;
}

}  // namespace cvanet
