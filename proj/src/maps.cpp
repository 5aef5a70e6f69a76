#include "mapprior/maps.hpp"

#include <array>
#include <cmath>
#include <string>

namespace mapprior::maps {

namespace {

int to_cells(double meters, double resolution) {
  return static_cast<int>(std::lround(meters / resolution));
}

void mark(OccupancyMap& map, const Room& r, Cell value) {
  const double res = map.resolution();
  map.fill_rect(to_cells(r.x0, res), to_cells(r.y0, res), to_cells(r.x1, res) - 1, to_cells(r.y1, res) - 1,
                value);
}

}  // namespace

OccupancyMap carve(double width_m, double height_m, double resolution, std::span<const Room> free_areas) {
  OccupancyMap map(to_cells(width_m, resolution), to_cells(height_m, resolution), resolution, {},
                   Cell::Occupied);
  for (const Room& r : free_areas) mark(map, r, Cell::Free);
  return map;
}

OccupancyMap corridor_rooms(double resolution) {
  // Walls are the 0.5 m gaps left between carved rectangles.
  const std::array<Room, 25> areas{{
      // east-west hallway and north-south corridor
      {1.0, 14.5, 47.0, 17.0},
      {38.0, 1.0, 40.5, 31.0},
      // north rooms
      {1.0, 17.5, 9.5, 31.0},
      {10.0, 17.5, 19.5, 31.0},
      {20.0, 17.5, 27.5, 24.0},
      {20.0, 24.5, 27.5, 31.0},
      {28.0, 17.5, 37.5, 31.0},
      {41.0, 17.5, 47.0, 31.0},
      // south rooms
      {1.0, 1.0, 12.5, 14.0},
      {13.0, 1.0, 22.5, 14.0},
      {23.0, 1.0, 37.5, 8.0},
      {23.0, 8.5, 37.5, 14.0},
      {41.0, 1.0, 47.0, 14.0},
      // doors onto the hallway (north side)
      {4.0, 17.0, 5.5, 17.5},
      {15.5, 17.0, 17.0, 17.5},
      {21.0, 17.0, 22.5, 17.5},
      {33.0, 17.0, 34.5, 17.5},
      // door between the two stacked north rooms
      {25.5, 24.0, 27.0, 24.5},
      // doors onto the hallway (south side)
      {9.0, 14.0, 10.5, 14.5},
      {14.0, 14.0, 15.5, 14.5},
      {30.0, 14.0, 31.5, 14.5},
      // door between the two stacked south rooms
      {24.0, 8.0, 25.5, 8.5},
      // east rooms open onto the north-south corridor
      {40.5, 26.0, 41.0, 27.5},
      {40.5, 5.0, 41.0, 6.5},
      {40.5, 11.0, 41.0, 12.5},
  }};
  OccupancyMap map = carve(48.0, 32.0, resolution, areas);
  // pillars and furniture blocks
  const std::array<Room, 6> blocks{{
      {5.0, 23.0, 6.5, 25.0},
      {13.0, 22.0, 16.5, 23.0},
      {31.0, 22.0, 33.0, 27.0},
      {5.0, 6.0, 8.0, 8.0},
      {17.0, 4.0, 18.5, 10.0},
      {43.0, 21.0, 45.0, 23.0},
  }};
  for (const Room& b : blocks) mark(map, b, Cell::Occupied);
  return map;
}

OccupancyMap corridor(double length_m, double corridor_width_m, double resolution) {
  const double margin = 1.0;
  const std::array<Room, 1> areas{{{margin, margin, margin + length_m, margin + corridor_width_m}}};
  return carve(length_m + 2 * margin, corridor_width_m + 2 * margin, resolution, areas);
}

OccupancyMap open_box(double width_m, double height_m, double resolution) {
  OccupancyMap map(to_cells(width_m, resolution), to_cells(height_m, resolution), resolution, {}, Cell::Free);
  const int w = map.width(), h = map.height();
  map.fill_rect(0, 0, w - 1, 0, Cell::Occupied);
  map.fill_rect(0, h - 1, w - 1, h - 1, Cell::Occupied);
  map.fill_rect(0, 0, 0, h - 1, Cell::Occupied);
  map.fill_rect(w - 1, 0, w - 1, h - 1, Cell::Occupied);
  return map;
}

OccupancyMap hallway_with_side_rooms(double resolution) {
  const std::array<Room, 9> areas{{
      {1.0, 7.0, 39.0, 9.0},
      {1.0, 9.5, 9.5, 15.0},
      {10.0, 9.5, 19.5, 15.0},
      {20.0, 9.5, 29.5, 15.0},
      {30.0, 9.5, 39.0, 15.0},
      // wide doorways
      {3.0, 9.0, 7.0, 9.5},
      {12.0, 9.0, 16.0, 9.5},
      {22.0, 9.0, 26.0, 9.5},
      {32.0, 9.0, 36.0, 9.5},
  }};
  return carve(40.0, 16.0, resolution, areas);
}

OccupancyMap by_name(std::string_view name, double resolution) {
  if (name == "corridor_rooms") return corridor_rooms(resolution);
  if (name == "corridor") return corridor(30.0, 2.5, resolution);
  if (name == "open") return open_box(16.0, 16.0, resolution);
  if (name == "hallway") return hallway_with_side_rooms(resolution);
  throw MapError("unknown map layout '" + std::string(name) + "'");
}

}  // namespace mapprior::maps
