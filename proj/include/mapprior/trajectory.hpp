#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mapprior/occupancy_map.hpp"

namespace mapprior {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Wraps to (-pi, pi].
double wrap_angle(double a);

struct Pose {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Point2 position() const { return {x, y}; }
  friend bool operator==(const Pose&, const Pose&) = default;
};

struct Trajectory {
  std::vector<Pose> poses;

  std::size_t size() const { return poses.size(); }
  /// Sampling period; requires at least two poses.
  double period() const;
  /// Throws SimulationError unless there are >= 2 poses, t is nondecreasing,
  /// theta is wrapped and (when given) every pose is in free space.
  void validate(const OccupancyMap* map = nullptr) const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Relative motion over one sampling period, expressed in the odometry frame.
struct OdometrySample {
  double t = 0.0;  // end of the interval
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;

  friend bool operator==(const OdometrySample&, const OdometrySample&) = default;
};

using OdometryStream = std::vector<OdometrySample>;

enum class MotionProfile { Pedestrian, Wheeled };

MotionProfile parse_profile(std::string_view name);
const char* profile_name(MotionProfile p);

/// Odometry corruption parameters. Sigmas in cells are converted with the
/// map resolution.
struct NoiseProfile {
  double velocity_bias_sigma = 0.5;   // multiplicative, unitless
  double additive_sigma_cells = 0.25;  // per step, per axis
  double heading_drift_sigma = 0.0;   // rad per step, wheeled only
  double bias_period_s = 1.0;         // a fresh bias is drawn every period
  std::optional<double> forced_bias;  // test hook: fixed bias, no draw

  static NoiseProfile pedestrian();
  static NoiseProfile wheeled();
  static NoiseProfile none();
  static NoiseProfile for_profile(MotionProfile p);
};

/// Operating rate of the network and the filter.
inline constexpr double kFilterRateHz = 1.0;

/// Walking speed and wheeled-robot speed targeted by the generator.
inline constexpr double kPedestrianSpeed = 1.3;
inline constexpr double kWheeledSpeed = 0.2;
inline constexpr double kWheelRadius = 0.033;

/// Window length in seconds per profile (5 s walking, 20 s driving).
double window_seconds(MotionProfile p);
int window_length(MotionProfile p);

/// Differential-drive update: ds = pi * r * (n_left + n_right), position
/// advances ds along theta + dtheta, then theta += dtheta.
Pose diff_drive_step(const Pose& pose, double revs_left, double revs_right, double dtheta,
                     double wheel_radius, double dt = 0.0);

/// Generates a ground-truth trajectory sampled at 1 Hz covering `duration_s`
/// seconds. Every pose lies in free space.
Trajectory generate_trajectory(const OccupancyMap& map, std::uint64_t seed, double duration_s,
                               MotionProfile profile);

/// Exact per-step displacements of a trajectory in the world frame.
OdometryStream ground_truth_odometry(const Trajectory& traj);

/// Corrupts ground-truth motion into an odometry stream. Displacements are
/// scaled by a piecewise-constant bias b ~ N(1, velocity_bias_sigma), redrawn
/// every bias_period_s, then white noise N(0, additive_sigma_cells *
/// resolution) is added per axis. With heading_drift_sigma > 0 the odometry
/// frame heading random-walks and displacements are rotated into it.
OdometryStream corrupt_to_odometry(const Trajectory& traj, const NoiseProfile& noise, double resolution,
                                   std::uint64_t seed);

/// Integrates an odometry stream from `start`; the result has one more pose
/// than the stream.
Trajectory integrate_odometry(const OdometryStream& odom, const Pose& start);

/// Positions (meters) relative to the first sample of the window.
struct TrajectoryWindow {
  std::vector<Vec2> positions;

  std::size_t size() const { return positions.size(); }
  friend bool operator==(const TrajectoryWindow&, const TrajectoryWindow&) = default;
};

/// Sliding windows of L = n_seconds * rate_hz cumulative positions over an
/// odometry stream; consecutive windows start one period apart.
std::vector<TrajectoryWindow> window(const OdometryStream& stream, double n_seconds, double rate_hz);

/// Same over ground-truth poses.
std::vector<TrajectoryWindow> window(const Trajectory& traj, double n_seconds, double rate_hz);

/// Window made of `length` consecutive entries of `positions` ending at index `end`.
TrajectoryWindow window_ending_at(std::span<const Vec2> positions, std::size_t end, std::size_t length);

/// Synthetic step detector output for dead reckoning: times and headings.
struct StepEvents {
  std::vector<double> t;
  std::vector<double> heading;
};

struct StepNoise {
  double stride_mean_m = 0.72;
  double stride_sigma_m = 0.05;
  double heading_noise_rad = 0.03;
  double heading_drift_rad_per_step = 0.004;  // random-walk sigma
};

StepEvents synthesize_steps(const Trajectory& traj, const StepNoise& noise, std::uint64_t seed);

// CSV with a header row; see README for the schemas.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::filesystem::path& path);
void write_odometry_csv(const std::filesystem::path& path, const OdometryStream& odom);
OdometryStream read_odometry_csv(const std::filesystem::path& path);
void write_steps_csv(const std::filesystem::path& path, const StepEvents& steps);
StepEvents read_steps_csv(const std::filesystem::path& path);

}  // namespace mapprior
