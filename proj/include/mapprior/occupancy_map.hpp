#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "mapprior/grid.hpp"

namespace mapprior {

enum class Cell : std::uint8_t { Free = 0, Occupied = 1 };

class MapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 2D free/occupied grid with a metric frame. Cell (0,0) has its lower-left
/// corner at `origin`; cell (x,y) covers [origin + x*res, origin + (x+1)*res).
class OccupancyMap {
 public:
  OccupancyMap() = default;
  OccupancyMap(int width, int height, double resolution, Point2 origin = {},
               Cell fill = Cell::Free);
  OccupancyMap(Grid<Cell> cells, double resolution, Point2 origin = {});

  int width() const { return cells_.width(); }
  int height() const { return cells_.height(); }
  double resolution() const { return resolution_; }
  Point2 origin() const { return origin_; }

  bool in_bounds(CellIndex c) const { return cells_.contains(c); }
  Cell at(CellIndex c) const { return cells_[c]; }
  /// Out-of-bounds cells count as occupied.
  bool free(CellIndex c) const { return in_bounds(c) && cells_[c] == Cell::Free; }
  bool free(int x, int y) const { return free(CellIndex{x, y}); }
  void set(CellIndex c, Cell value) { cells_[c] = value; }

  /// Containing cell by floor(); points on a shared edge go to the upper cell.
  CellIndex cell_of(Point2 world) const;
  Point2 center_of(CellIndex c) const;

  /// Fills the closed rectangle of cells [x0,x1]x[y0,y1], clipped to bounds.
  void fill_rect(int x0, int y0, int x1, int y1, Cell value);

  std::size_t free_count() const;
  const Grid<Cell>& cells() const { return cells_; }

  friend bool operator==(const OccupancyMap&, const OccupancyMap&) = default;

 private:
  Grid<Cell> cells_;
  double resolution_ = 1.0;
  Point2 origin_{};
};

bool is_free(const OccupancyMap& map, Point2 world);

/// True when the straight segment a->b touches any occupied (or out of
/// bounds) cell, including the cells containing a and b.
bool segment_hits_obstacle(const OccupancyMap& map, Point2 a, Point2 b);

struct MapCrop {
  CellIndex offset;  // parent cell of the crop's (0,0)
  OccupancyMap map;
};

/// size x size crop centred on `center`, shifted as needed to stay inside the
/// parent. The crop keeps the parent's metric frame.
MapCrop crop(const OccupancyMap& map, CellIndex center, int size);

/// Binary PGM (P5, maxval 255) plus JSON sidecar
/// {"resolution_m_per_px", "origin_x_m", "origin_y_m"}. Image row 0 is the top
/// of the map (highest y), the usual occupancy-grid image convention.
OccupancyMap load_map(const std::filesystem::path& pgm_path,
                      const std::filesystem::path& meta_path, int free_threshold = 128);
void save_map(const OccupancyMap& map, const std::filesystem::path& pgm_path,
              const std::filesystem::path& meta_path);

/// Writes an 8-bit grayscale PGM; row 0 of `pixels` is written as the bottom
/// image row so that images line up with saved maps.
void write_pgm(const std::filesystem::path& path, const Grid<std::uint8_t>& pixels);
Grid<std::uint8_t> read_pgm(const std::filesystem::path& path);

}  // namespace mapprior
