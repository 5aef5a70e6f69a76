#include "mapprior/target.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "mapprior/kernels.hpp"

namespace mapprior {

namespace {

void bresenham(CellIndex a, CellIndex b, std::vector<CellIndex>& out) {
  int x = a.x, y = a.y;
  const int dx = std::abs(b.x - a.x), dy = -std::abs(b.y - a.y);
  const int sx = a.x < b.x ? 1 : -1, sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  while (true) {
    out.push_back({x, y});
    if (x == b.x && y == b.y) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
}

}  // namespace

TrajectoryKernel rasterize_kernel(const TrajectoryWindow& window, double resolution) {
  if (window.positions.empty()) throw std::invalid_argument("rasterize_kernel: empty window");
  if (!(resolution > 0)) throw std::invalid_argument("rasterize_kernel: resolution must be positive");
  std::vector<CellIndex> cells;
  const auto to_cell = [resolution](const Vec2& p) {
    return CellIndex{static_cast<int>(std::lround(p.x / resolution)),
                     static_cast<int>(std::lround(p.y / resolution))};
  };
  CellIndex prev = to_cell(window.positions.front());
  cells.push_back(prev);
  for (std::size_t i = 1; i < window.positions.size(); ++i) {
    const CellIndex next = to_cell(window.positions[i]);
    bresenham(prev, next, cells);
    prev = next;
  }
  const auto key = [](const CellIndex& c) { return std::pair{c.y, c.x}; };
  std::set<std::pair<int, int>> visited;
  for (const CellIndex& c : cells) visited.insert(key(c));

  int min_x = cells.front().x, max_x = min_x, min_y = cells.front().y, max_y = min_y;
  for (const CellIndex& c : cells) {
    min_x = std::min(min_x, c.x);
    max_x = std::max(max_x, c.x);
    min_y = std::min(min_y, c.y);
    max_y = std::max(max_y, c.y);
  }
  TrajectoryKernel k{Grid<double>(max_x - min_x + 1, max_y - min_y + 1, 0.0), {prev.x - min_x, prev.y - min_y}};
  const double w = 1.0 / static_cast<double>(visited.size());
  for (const auto& [y, x] : visited) k.weights(x - min_x, y - min_y) = w;
  return k;
}

Grid<double> cross_correlate(const OccupancyMap& map, const TrajectoryKernel& kernel) {
  if (kernel.width() > map.width() || kernel.height() > map.height())
    throw std::invalid_argument("cross_correlate: kernel larger than map");
  Grid<double> out;
  kernels::cross_correlate(map, kernel, out);
  return out;
}

double target_value(double overlap) { return kTargetScale * std::exp(kTargetExponent * overlap); }

Grid<double> inverse_area_weights(const Grid<std::uint8_t>& mask) {
  Grid<int> labels(mask.width(), mask.height(), -1);
  Grid<double> weights(mask.width(), mask.height(), 1.0);
  std::vector<CellIndex> stack, members;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y) || labels(x, y) >= 0) continue;
      members.clear();
      stack.push_back({x, y});
      labels(x, y) = 1;
      while (!stack.empty()) {
        const CellIndex c = stack.back();
        stack.pop_back();
        members.push_back(c);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const CellIndex n{c.x + dx, c.y + dy};
            if (mask.contains(n) && mask[n] && labels[n] < 0) {
              labels[n] = 1;
              stack.push_back(n);
            }
          }
      }
      const double w = 1.0 / static_cast<double>(members.size());
      for (const CellIndex& c : members) weights[c] = w;
    }
  }
  return weights;
}

TargetMap make_target(const OccupancyMap& map, const TrajectoryWindow& window, LossWeighting weighting) {
  TargetMap t;
  t.overlap = cross_correlate(map, rasterize_kernel(window, map.resolution()));
  t.values = Grid<double>(map.width(), map.height());
  t.feasible_mask = Grid<std::uint8_t>(map.width(), map.height(), 0);
  for (std::size_t i = 0; i < t.overlap.size(); ++i) {
    t.values.storage()[i] = target_value(t.overlap.storage()[i]);
    t.feasible_mask.storage()[i] = t.overlap.storage()[i] >= 1.0 - kFeasibleEpsilon ? 1 : 0;
  }
  t.loss_weights = inverse_area_weights(t.feasible_mask);
  if (weighting == LossWeighting::Balanced) {
    std::size_t rest = 0;
    for (std::uint8_t m : t.feasible_mask.storage()) rest += m ? 0 : 1;
    for (std::size_t i = 0; i < t.loss_weights.size(); ++i)
      if (!t.feasible_mask.storage()[i]) t.loss_weights.storage()[i] = 1.0 / static_cast<double>(rest);
  }
  double sum = 0.0;
  for (double w : t.loss_weights.storage()) sum += w;
  const double scale = static_cast<double>(t.loss_weights.size()) / sum;
  for (double& w : t.loss_weights.storage()) w *= scale;
  return t;
}

namespace {

template <typename T>
void debug_pgm(const std::filesystem::path& path, const Grid<T>& values) {
  Grid<std::uint8_t> px(values.width(), values.height(), 0);
  if (values.size() > 0) {
    const auto [lo, hi] = std::minmax_element(values.storage().begin(), values.storage().end());
    const double span = static_cast<double>(*hi) - static_cast<double>(*lo);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double v = span > 0 ? (static_cast<double>(values.storage()[i]) - *lo) / span : 0.0;
      px.storage()[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }
  }
  write_pgm(path, px);
}

}  // namespace

void write_debug_pgm(const std::filesystem::path& path, const Grid<double>& values) { debug_pgm(path, values); }
void write_debug_pgm(const std::filesystem::path& path, const Grid<float>& values) { debug_pgm(path, values); }

}  // namespace mapprior
