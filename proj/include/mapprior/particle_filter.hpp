#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "mapprior/grid.hpp"
#include "mapprior/occupancy_map.hpp"
#include "mapprior/prior_model.hpp"
#include "mapprior/trajectory.hpp"

namespace mapprior {

using Rng = std::mt19937_64;

struct Particle {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // used in wheeled mode
  double weight = 0.0;
  bool hit_obstacle = false;
};

using ParticleSet = std::vector<Particle>;

struct FilterConfig {
  int particle_count = 1000;
  double init_sigma = 0.01;       // m, and rad for heading
  double motion_sigma = 0.31622776601683794;  // m per axis per step (rad for heading in wheeled mode)
  double reinit_radius = 5.0;     // m
  double reinit_fraction = 0.90;  // re-initialize when strictly more are flagged
  double rate_hz = kFilterRateHz;
  int window_len = 5;
  MotionProfile mode = MotionProfile::Pedestrian;

  /// sqrt(0.1) m and 5 steps for walking, sqrt(0.01) and 20 steps for driving.
  static FilterConfig for_profile(MotionProfile mode);
  void validate() const;
};

ParticleSet init_particles(const Pose& start, const FilterConfig& config, Rng& rng);

/// Motion update. Walking: x += dx + noise. Driving: s = |(dx, dy)| advanced
/// along each particle's heading, then theta += dtheta + noise. Flags particles
/// whose step segment crosses an occupied cell.
void propagate(ParticleSet& particles, const OdometrySample& odom, const OccupancyMap& map,
               const FilterConfig& config, Rng& rng);

inline constexpr double kWeightFloor = 1e-12;

/// weight = max(heatmap at the particle's cell, floor), normalized. Returns
/// true (and leaves uniform weights) when every particle sits at the floor.
bool reweight(ParticleSet& particles, const Grid<double>& heatmap, const OccupancyMap& map);

/// Systematic resampling indices for normalized `weights` and offset u0 in
/// [0, 1/n).
std::vector<std::size_t> low_variance_indices(std::span<const double> weights, double u0);

/// Throws std::invalid_argument on zero total weight. Output weights are uniform.
void resample_low_variance(ParticleSet& particles, Rng& rng);

/// Particle closest to the component-wise median position (lowest index on ties).
std::size_t estimate_index(const ParticleSet& particles);
Pose estimate(const ParticleSet& particles);

/// When more than reinit_fraction of the particles are flagged, scatters all
/// of them uniformly over free space within reinit_radius of `last` (doubling
/// the radius up to the map diagonal if that disc has no free cell). Clears
/// the flags either way. Returns whether it fired.
bool maybe_reinit(ParticleSet& particles, const Pose& last, const OccupancyMap& map, const FilterConfig& config,
                  Rng& rng);

enum class PriorKind { Learned, Heuristic, None, Custom };

PriorKind parse_prior(std::string_view name);
const char* prior_name(PriorKind kind);

struct PriorSource {
  PriorKind kind = PriorKind::None;
  const PriorModel* model = nullptr;          // learned only
  const DeepMapTensor* map_tensor = nullptr;  // learned only, encoded once
  std::function<Grid<double>(const TrajectoryWindow&)> custom;  // custom only
};

/// Heatmap over the map for an odometry window.
Grid<double> prior_heatmap(const PriorSource& prior, const OccupancyMap& map, const TrajectoryWindow& window);

struct FilterResult {
  Trajectory estimate;           // start pose, then one pose per odometry sample
  std::vector<double> step_ms;   // wall time per filter step
  int reinit_count = 0;
  int degenerate_count = 0;
};

/// propagate -> window -> heatmap -> reweight -> resample -> estimate ->
/// maybe_reinit per odometry sample. Steps before a full window is available
/// skip the prior. With PriorKind::None only propagation and estimation run.
FilterResult run_filter(const OdometryStream& odom, const OccupancyMap& map, const PriorSource& prior,
                        const Pose& start, const FilterConfig& config, std::uint64_t seed);

}  // namespace mapprior
