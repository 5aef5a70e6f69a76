#include "mapprior/occupancy_map.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "mapprior/io.hpp"

namespace mapprior {

namespace {

void validate_frame(int width, int height, double resolution) {
  if (width < 1 || height < 1) throw MapError("map dimensions must be at least 1x1");
  if (!(resolution > 0.0) || !std::isfinite(resolution))
    throw MapError("map resolution must be positive");
}

}  // namespace

OccupancyMap::OccupancyMap(int width, int height, double resolution, Point2 origin, Cell fill)
    : resolution_(resolution), origin_(origin) {
  validate_frame(width, height, resolution);
  cells_ = Grid<Cell>(width, height, fill);
}

OccupancyMap::OccupancyMap(Grid<Cell> cells, double resolution, Point2 origin)
    : cells_(std::move(cells)), resolution_(resolution), origin_(origin) {
  validate_frame(cells_.width(), cells_.height(), resolution);
}

CellIndex OccupancyMap::cell_of(Point2 world) const {
  const double fx = std::floor((world.x - origin_.x) / resolution_);
  const double fy = std::floor((world.y - origin_.y) / resolution_);
  constexpr double lim = std::numeric_limits<int>::max() / 2;
  return {static_cast<int>(std::clamp(fx, -lim, lim)), static_cast<int>(std::clamp(fy, -lim, lim))};
}

Point2 OccupancyMap::center_of(CellIndex c) const {
  return {origin_.x + (c.x + 0.5) * resolution_, origin_.y + (c.y + 0.5) * resolution_};
}

void OccupancyMap::fill_rect(int x0, int y0, int x1, int y1, Cell value) {
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, width() - 1);
  y1 = std::min(y1, height() - 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) cells_(x, y) = value;
}

std::size_t OccupancyMap::free_count() const {
  return static_cast<std::size_t>(
      std::count(cells_.storage().begin(), cells_.storage().end(), Cell::Free));
}

bool is_free(const OccupancyMap& map, Point2 world) {
  if (!std::isfinite(world.x) || !std::isfinite(world.y)) return false;
  return map.free(map.cell_of(world));
}

bool segment_hits_obstacle(const OccupancyMap& map, Point2 a, Point2 b) {
  if (!std::isfinite(a.x) || !std::isfinite(a.y) || !std::isfinite(b.x) || !std::isfinite(b.y))
    return true;
  // Grid traversal in cell units (Amanatides & Woo).
  const double res = map.resolution();
  const double ax = (a.x - map.origin().x) / res, ay = (a.y - map.origin().y) / res;
  const double bx = (b.x - map.origin().x) / res, by = (b.y - map.origin().y) / res;
  int cx = static_cast<int>(std::floor(ax));
  int cy = static_cast<int>(std::floor(ay));
  const int ex = static_cast<int>(std::floor(bx));
  const int ey = static_cast<int>(std::floor(by));
  const double dx = bx - ax, dy = by - ay;
  const int step_x = dx > 0 ? 1 : -1;
  const int step_y = dy > 0 ? 1 : -1;
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double t_delta_x = dx != 0 ? std::abs(1.0 / dx) : inf;
  const double t_delta_y = dy != 0 ? std::abs(1.0 / dy) : inf;
  double t_max_x = dx != 0 ? ((dx > 0 ? (cx + 1 - ax) : (ax - cx)) * t_delta_x) : inf;
  double t_max_y = dy != 0 ? ((dy > 0 ? (cy + 1 - ay) : (ay - cy)) * t_delta_y) : inf;

  const int max_steps = std::abs(ex - cx) + std::abs(ey - cy) + 2;
  for (int i = 0; i < max_steps; ++i) {
    if (!map.free(cx, cy)) return true;
    if (cx == ex && cy == ey) return false;
    if (t_max_x < t_max_y) {
      cx += step_x;
      t_max_x += t_delta_x;
    } else {
      cy += step_y;
      t_max_y += t_delta_y;
    }
  }
  return !map.free(ex, ey);
}

MapCrop crop(const OccupancyMap& map, CellIndex center, int size) {
  if (size < 1) throw MapError("crop size must be positive");
  if (size > map.width() || size > map.height())
    throw MapError("crop size " + std::to_string(size) + " exceeds map " +
                   std::to_string(map.width()) + "x" + std::to_string(map.height()));
  const int x0 = std::clamp(center.x - size / 2, 0, map.width() - size);
  const int y0 = std::clamp(center.y - size / 2, 0, map.height() - size);
  Grid<Cell> cells(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) cells(x, y) = map.at({x0 + x, y0 + y});
  const Point2 origin{map.origin().x + x0 * map.resolution(), map.origin().y + y0 * map.resolution()};
  return {{x0, y0}, OccupancyMap(std::move(cells), map.resolution(), origin)};
}

// --- PGM ---------------------------------------------------------------------

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(const std::string& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
      ++pos;
    } else if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  std::size_t start = pos;
  while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
  return buf.substr(start, pos - start);
}

int parse_positive(const std::string& tok, const char* what) {
  try {
    std::size_t used = 0;
    int v = std::stoi(tok, &used);
    if (used != tok.size() || v < 1) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw MapError(std::string("malformed PGM header: bad ") + what + " '" + tok + "'");
  }
}

}  // namespace

Grid<std::uint8_t> read_pgm(const std::filesystem::path& path) {
  const std::string buf = read_file(path);
  std::size_t pos = 0;
  if (next_token(buf, pos) != "P5") throw MapError("malformed PGM header: expected P5 in " + path.string());
  const int width = parse_positive(next_token(buf, pos), "width");
  const int height = parse_positive(next_token(buf, pos), "height");
  const int maxval = parse_positive(next_token(buf, pos), "maxval");
  if (maxval != 255) throw MapError("unsupported PGM maxval " + std::to_string(maxval));
  if (pos >= buf.size()) throw MapError("malformed PGM header: missing payload");
  ++pos;  // single whitespace byte after maxval
  const std::size_t expected = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (buf.size() - pos != expected)
    throw MapError("PGM payload has " + std::to_string(buf.size() - pos) + " bytes, header says " +
                   std::to_string(width) + "x" + std::to_string(height));
  Grid<std::uint8_t> pixels(width, height);
  for (int r = 0; r < height; ++r)
    for (int x = 0; x < width; ++x)
      pixels(x, height - 1 - r) = static_cast<std::uint8_t>(buf[pos + static_cast<std::size_t>(r) * width + x]);
  return pixels;
}

void write_pgm(const std::filesystem::path& path, const Grid<std::uint8_t>& pixels) {
  std::string out = "P5\n" + std::to_string(pixels.width()) + " " + std::to_string(pixels.height()) + "\n255\n";
  out.reserve(out.size() + pixels.size());
  for (int r = 0; r < pixels.height(); ++r)
    for (int x = 0; x < pixels.width(); ++x)
      out.push_back(static_cast<char>(pixels(x, pixels.height() - 1 - r)));
  write_file_atomic(path, out);
}

OccupancyMap load_map(const std::filesystem::path& pgm_path, const std::filesystem::path& meta_path,
                      int free_threshold) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw MapError("malformed map sidecar " + meta_path.string() + ": " + e.what());
  }
  double resolution = 0.0;
  Point2 origin;
  try {
    resolution = meta.at("resolution_m_per_px").get<double>();
    origin = {meta.value("origin_x_m", 0.0), meta.value("origin_y_m", 0.0)};
  } catch (const nlohmann::json::exception& e) {
    throw MapError("map sidecar " + meta_path.string() + ": " + e.what());
  }
  if (!(resolution > 0.0)) throw MapError("map resolution must be positive");
  const Grid<std::uint8_t> pixels = read_pgm(pgm_path);
  Grid<Cell> cells(pixels.width(), pixels.height());
  for (std::size_t i = 0; i < pixels.size(); ++i)
    cells.storage()[i] = pixels.storage()[i] >= free_threshold ? Cell::Free : Cell::Occupied;
  return OccupancyMap(std::move(cells), resolution, origin);
}

void save_map(const OccupancyMap& map, const std::filesystem::path& pgm_path,
              const std::filesystem::path& meta_path) {
  Grid<std::uint8_t> pixels(map.width(), map.height());
  for (std::size_t i = 0; i < pixels.size(); ++i)
    pixels.storage()[i] = map.cells().storage()[i] == Cell::Free ? 255 : 0;
  write_pgm(pgm_path, pixels);
  nlohmann::json meta{{"resolution_m_per_px", map.resolution()},
                      {"origin_x_m", map.origin().x},
                      {"origin_y_m", map.origin().y}};
  write_file_atomic(meta_path, meta.dump(2) + "\n");
}

}  // namespace mapprior
