#include "mapprior/path_planning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace mapprior {

OccupancyMap inflate(const OccupancyMap& map, int radius_cells) {
  if (radius_cells <= 0) return map;
  OccupancyMap out = map;
  const int r2 = radius_cells * radius_cells;
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      if (map.free(x, y)) continue;
      for (int dy = -radius_cells; dy <= radius_cells; ++dy)
        for (int dx = -radius_cells; dx <= radius_cells; ++dx)
          if (dx * dx + dy * dy <= r2 && out.in_bounds({x + dx, y + dy}))
            out.set({x + dx, y + dy}, Cell::Occupied);
    }
  }
  return out;
}

Components free_components(const OccupancyMap& map) {
  Components comp{Grid<int>(map.width(), map.height(), -1), {}};
  std::vector<CellIndex> stack;
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      if (!map.free(x, y) || comp.labels(x, y) >= 0) continue;
      const int label = static_cast<int>(comp.sizes.size());
      std::size_t count = 0;
      stack.push_back({x, y});
      comp.labels(x, y) = label;
      while (!stack.empty()) {
        const CellIndex c = stack.back();
        stack.pop_back();
        ++count;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const CellIndex n{c.x + dx, c.y + dy};
            if (map.free(n) && comp.labels[n] < 0) {
              comp.labels[n] = label;
              stack.push_back(n);
            }
          }
      }
      comp.sizes.push_back(count);
    }
  }
  return comp;
}

std::optional<std::vector<CellIndex>> plan_path(const OccupancyMap& map, CellIndex start, CellIndex goal) {
  if (!map.free(start) || !map.free(goal)) return std::nullopt;
  const int w = map.width();
  const auto idx = [w](CellIndex c) { return static_cast<std::size_t>(c.y) * w + c.x; };
  const auto heuristic = [&](CellIndex c) {
    const double dx = std::abs(c.x - goal.x), dy = std::abs(c.y - goal.y);
    return (dx + dy) + (std::sqrt(2.0) - 2.0) * std::min(dx, dy);
  };
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> g(static_cast<std::size_t>(w) * map.height(), inf);
  std::vector<int> parent(g.size(), -1);
  std::vector<char> closed(g.size(), 0);

  struct Entry {
    double f;
    double g;
    std::size_t id;
    bool operator>(const Entry& o) const { return f != o.f ? f > o.f : id > o.id; }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  g[idx(start)] = 0.0;
  open.push({heuristic(start), 0.0, idx(start)});
  while (!open.empty()) {
    const Entry e = open.top();
    open.pop();
    if (closed[e.id]) continue;
    closed[e.id] = 1;
    const CellIndex c{static_cast<int>(e.id % w), static_cast<int>(e.id / w)};
    if (c == goal) break;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const CellIndex n{c.x + dx, c.y + dy};
        if (!map.free(n)) continue;
        if (dx != 0 && dy != 0 && (!map.free(c.x + dx, c.y) || !map.free(c.x, c.y + dy))) continue;
        const double step = (dx != 0 && dy != 0) ? std::sqrt(2.0) : 1.0;
        const std::size_t nid = idx(n);
        if (e.g + step < g[nid]) {
          g[nid] = e.g + step;
          parent[nid] = static_cast<int>(e.id);
          open.push({g[nid] + heuristic(n), g[nid], nid});
        }
      }
    }
  }
  if (!closed[idx(goal)]) return std::nullopt;
  std::vector<CellIndex> path;
  for (int id = static_cast<int>(idx(goal)); id >= 0; id = parent[id])
    path.push_back({id % w, id / w});
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<Point2> shortcut_path(const OccupancyMap& map, const std::vector<CellIndex>& path) {
  std::vector<Point2> out;
  if (path.empty()) return out;
  std::size_t i = 0;
  out.push_back(map.center_of(path.front()));
  while (i + 1 < path.size()) {
    std::size_t j = i + 1;
    for (std::size_t k = path.size() - 1; k > i + 1; --k) {
      if (!segment_hits_obstacle(map, map.center_of(path[i]), map.center_of(path[k]))) {
        j = k;
        break;
      }
    }
    out.push_back(map.center_of(path[j]));
    i = j;
  }
  return out;
}

}  // namespace mapprior
