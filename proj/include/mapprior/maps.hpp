#pragma once

#include <span>
#include <string_view>

#include "mapprior/occupancy_map.hpp"

namespace mapprior::maps {

/// Axis-aligned free rectangle in meters, relative to the map origin.
struct Room {
  double x0, y0, x1, y1;
};

/// Starts fully occupied and carves the given rectangles free.
OccupancyMap carve(double width_m, double height_m, double resolution, std::span<const Room> free_areas);

/// 48 x 32 m office floor: a long east-west hallway with rooms on both
/// sides joined by doors, a north-south corridor and a few interior pillars.
OccupancyMap corridor_rooms(double resolution = 0.25);

/// Single straight east-west corridor `corridor_width_m` wide inside a
/// closed box.
OccupancyMap corridor(double length_m, double corridor_width_m, double resolution = 0.25);

/// Open rectangle with a one-cell occupied border.
OccupancyMap open_box(double width_m, double height_m, double resolution = 0.25);

/// Hallway with a row of rooms opening onto it through wide doorways.
OccupancyMap hallway_with_side_rooms(double resolution = 0.25);

/// Looks up one of the named layouts above ("corridor_rooms", "corridor",
/// "open", "hallway").
OccupancyMap by_name(std::string_view name, double resolution = 0.25);

}  // namespace mapprior::maps
