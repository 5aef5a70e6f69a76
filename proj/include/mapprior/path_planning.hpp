#pragma once

#include <optional>
#include <vector>

#include "mapprior/occupancy_map.hpp"

namespace mapprior {

/// Marks every cell within `radius_cells` (Euclidean) of an occupied cell as
/// occupied.
OccupancyMap inflate(const OccupancyMap& map, int radius_cells);

/// Labels 8-connected free components; occupied cells get -1. Returns the
/// label grid and the size of each component.
struct Components {
  Grid<int> labels;
  std::vector<std::size_t> sizes;
};
Components free_components(const OccupancyMap& map);

/// 8-connected A* over free cells with octile costs. Diagonal moves may not
/// cut occupied corners.
std::optional<std::vector<CellIndex>> plan_path(const OccupancyMap& map, CellIndex start, CellIndex goal);

/// Greedy line-of-sight shortcutting of a cell path into world waypoints.
std::vector<Point2> shortcut_path(const OccupancyMap& map, const std::vector<CellIndex>& path);

}  // namespace mapprior
