#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mapprior/grid.hpp"
#include "mapprior/occupancy_map.hpp"
#include "mapprior/trajectory.hpp"

namespace mapprior {

class MetricsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TrajectoryError {
  double ate = 0.0;  // RMSE of per_step_errors
  double ee = 0.0;
  std::vector<double> per_step_errors;
  std::size_t unmatched = 0;  // ground-truth samples with no estimate within half a period
};

/// Associates every ground-truth pose with the nearest estimated timestamp
/// within half the ground-truth period. Throws MetricsError when nothing matches.
TrajectoryError trajectory_error(const Trajectory& est, const Trajectory& gt);

double ate(const Trajectory& est, const Trajectory& gt);
/// Distance between the final positions. Throws MetricsError on empty input.
double end_error(const Trajectory& est, const Trajectory& gt);

/// Empirical CDF: sorted errors paired with the fraction of values <= each.
std::vector<std::pair<double, double>> cdf_points(std::vector<double> errors);

inline constexpr double kPriorFloor = 1e-12;

/// Discretized Gaussian around `truth` over the free cells, normalized.
/// Occupied cells hold 0.
Grid<double> gaussian_location_distribution(const OccupancyMap& map, Point2 truth, double sigma);

/// KL(G || P): G the discretized Gaussian around `truth`, P the prior clamped
/// at kPriorFloor and normalized, both over the free cells.
double prior_kl(const Grid<double>& prior, const OccupancyMap& map, Point2 truth, double sigma = 1.0);

struct MetricsRow {
  std::string method;
  std::string map;
  std::string seed;  // trajectory identifier
  double ate_m = 0.0;
  double ee_m = 0.0;
  std::size_t n_steps = 0;
};

void write_cdf_csv(const std::filesystem::path& path, const std::vector<std::pair<double, double>>& points);

}  // namespace mapprior
