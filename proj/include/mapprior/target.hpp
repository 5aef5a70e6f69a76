#pragma once

#include <filesystem>
#include <vector>

#include "mapprior/grid.hpp"
#include "mapprior/occupancy_map.hpp"
#include "mapprior/trajectory.hpp"

namespace mapprior {

/// Rasterized trajectory footprint. Weights are nonnegative and sum to 1;
/// `anchor` is the kernel cell holding the trajectory's end point.
struct TrajectoryKernel {
  Grid<double> weights;
  CellIndex anchor;

  int width() const { return weights.width(); }
  int height() const { return weights.height(); }
};

/// Connects consecutive window positions (converted to cells) with Bresenham
/// lines and weights every visited cell uniformly.
TrajectoryKernel rasterize_kernel(const TrajectoryWindow& window, double resolution);

/// Mean free-space overlap of the kernel when its anchor is placed on each
/// cell: out(x) = sum_k kernel(k) * free(x - anchor + k), with cells outside
/// the map counting as occupied.
Grid<double> cross_correlate(const OccupancyMap& map, const TrajectoryKernel& kernel);

inline constexpr double kTargetScale = 1e-6;
inline constexpr double kTargetExponent = 14.0;
inline constexpr double kFeasibleEpsilon = 1e-6;

/// T = 1e-6 * exp(14 * overlap).
double target_value(double overlap);

struct TargetMap {
  Grid<double> overlap;  // T-bar
  Grid<double> values;   // T
  Grid<std::uint8_t> feasible_mask;
  Grid<double> loss_weights;
};

/// Cells of each 8-connected component of `mask` get 1/area, other cells 1.
/// Not normalized.
Grid<double> inverse_area_weights(const Grid<std::uint8_t>& mask);

enum class LossWeighting {
  InverseArea,  // feasible components 1/area, everything else 1
  Balanced,     // the infeasible cells also count as one region with 1/area
};

/// Training target for a ground-truth window whose end is scored at every
/// cell. Loss weights follow `weighting` and are normalized to mean 1 over
/// the map.
TargetMap make_target(const OccupancyMap& map, const TrajectoryWindow& window,
                      LossWeighting weighting = LossWeighting::InverseArea);

/// Linear 0-255 rescale of any scalar grid, for eyeballing targets and heatmaps.
void write_debug_pgm(const std::filesystem::path& path, const Grid<double>& values);
void write_debug_pgm(const std::filesystem::path& path, const Grid<float>& values);

}  // namespace mapprior
