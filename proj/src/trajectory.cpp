#include "mapprior/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "mapprior/io.hpp"
#include "mapprior/path_planning.hpp"

namespace mapprior {

double wrap_angle(double a) {
  if (!std::isfinite(a)) return a;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

double Trajectory::period() const {
  if (poses.size() < 2) throw SimulationError("trajectory needs at least two poses");
  return poses[1].t - poses[0].t;
}

void Trajectory::validate(const OccupancyMap* map) const {
  if (poses.size() < 2) throw SimulationError("trajectory needs at least two poses");
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const Pose& p = poses[i];
    if (!std::isfinite(p.t) || !std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.theta))
      throw SimulationError("non-finite pose at index " + std::to_string(i));
    if (i > 0 && p.t < poses[i - 1].t) throw SimulationError("time decreases at index " + std::to_string(i));
    if (p.theta <= -std::numbers::pi || p.theta > std::numbers::pi)
      throw SimulationError("heading not wrapped at index " + std::to_string(i));
    if (map && !is_free(*map, p.position()))
      throw SimulationError("pose " + std::to_string(i) + " lies outside free space");
  }
}

MotionProfile parse_profile(std::string_view name) {
  if (name == "pedestrian") return MotionProfile::Pedestrian;
  if (name == "wheeled") return MotionProfile::Wheeled;
  throw std::invalid_argument("unknown motion profile '" + std::string(name) + "'");
}

const char* profile_name(MotionProfile p) {
  return p == MotionProfile::Pedestrian ? "pedestrian" : "wheeled";
}

NoiseProfile NoiseProfile::pedestrian() { return NoiseProfile{}; }

NoiseProfile NoiseProfile::wheeled() {
  NoiseProfile n;
  n.heading_drift_sigma = 0.005;
  return n;
}

NoiseProfile NoiseProfile::none() {
  NoiseProfile n;
  n.velocity_bias_sigma = 0.0;
  n.additive_sigma_cells = 0.0;
  n.heading_drift_sigma = 0.0;
  return n;
}

NoiseProfile NoiseProfile::for_profile(MotionProfile p) {
  return p == MotionProfile::Pedestrian ? pedestrian() : wheeled();
}

double window_seconds(MotionProfile p) { return p == MotionProfile::Pedestrian ? 5.0 : 20.0; }

int window_length(MotionProfile p) {
  return static_cast<int>(std::lround(window_seconds(p) * kFilterRateHz));
}

namespace {

Pose advance(const Pose& pose, double ds, double dtheta, double dt) {
  Pose next = pose;
  next.x += ds * std::cos(dtheta + pose.theta);
  next.y += ds * std::sin(dtheta + pose.theta);
  next.theta = wrap_angle(pose.theta + dtheta);
  next.t = pose.t + dt;
  return next;
}

}  // namespace

Pose diff_drive_step(const Pose& pose, double revs_left, double revs_right, double dtheta,
                     double wheel_radius, double dt) {
  const double ds = std::numbers::pi * wheel_radius * (revs_left + revs_right);
  return advance(pose, ds, dtheta, dt);
}

// --- generation ---------------------------------------------------------------

namespace {

constexpr double kSimDt = 0.1;
constexpr int kSimStepsPerSample = 10;
constexpr int kMaxLegRetries = 40;
constexpr double kTrackWidth = 0.16;

struct ProfileParams {
  double speed;
  double max_turn_rate;
  double reach_radius;
  double clearance_m;
};

ProfileParams params_for(MotionProfile p) {
  if (p == MotionProfile::Pedestrian) return {kPedestrianSpeed, 2.5, 0.35, 0.5};
  return {kWheeledSpeed, 0.8, 0.15, 0.5};
}

CellIndex nearest_free(const OccupancyMap& map, CellIndex c) {
  if (map.free(c)) return c;
  for (int r = 1; r < std::max(map.width(), map.height()); ++r) {
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        if (std::max(std::abs(dx), std::abs(dy)) != r) continue;
        if (map.free(c.x + dx, c.y + dy)) return {c.x + dx, c.y + dy};
      }
  }
  throw SimulationError("no free space in map");
}

class Walker {
 public:
  Walker(const OccupancyMap& map, std::uint64_t seed, MotionProfile profile)
      : map_(map),
        profile_(profile),
        params_(params_for(profile)),
        planning_(inflate(map, static_cast<int>(std::ceil(params_.clearance_m / map.resolution())))),
        rng_(seed) {
    components_ = free_components(planning_);
    if (components_.sizes.empty()) throw SimulationError("no free space in map");
    main_label_ = static_cast<int>(std::max_element(components_.sizes.begin(), components_.sizes.end()) -
                                   components_.sizes.begin());
    for (int y = 0; y < planning_.height(); ++y)
      for (int x = 0; x < planning_.width(); ++x)
        if (components_.labels(x, y) == main_label_) reachable_.push_back({x, y});
  }

  Trajectory run(double duration_s) {
    const int samples = static_cast<int>(std::floor(duration_s * kFilterRateHz + 1e-9));
    const int total_steps = samples * kSimStepsPerSample;
    const CellIndex start = random_reachable();
    Pose pose{0.0, map_.center_of(start).x, map_.center_of(start).y, 0.0};
    std::vector<Pose> sim{pose};
    bool first_leg = true;

    while (static_cast<int>(sim.size()) - 1 < total_steps) {
      bool accepted = false;
      for (int attempt = 0; attempt < kMaxLegRetries && !accepted; ++attempt) {
        std::vector<Point2> waypoints;
        if (!plan_leg(sim.back(), waypoints)) continue;
        Pose leg_start = sim.back();
        if (first_leg) {
          leg_start.theta = wrap_angle(std::atan2(waypoints[1].y - leg_start.y, waypoints[1].x - leg_start.x));
        }
        std::vector<Pose> leg = follow(leg_start, waypoints, total_steps - (static_cast<int>(sim.size()) - 1),
                                       static_cast<int>(sim.size()) - 1);
        if (leg.empty() || !leg_feasible(sim, leg)) continue;
        if (first_leg) sim.back().theta = leg_start.theta;
        sim.insert(sim.end(), leg.begin(), leg.end());
        accepted = true;
        first_leg = false;
      }
      if (!accepted)
        throw SimulationError("unreachable waypoint after " + std::to_string(kMaxLegRetries) + " retries");
    }

    Trajectory traj;
    for (int i = 0; i <= samples; ++i) {
      Pose p = sim[static_cast<std::size_t>(i) * kSimStepsPerSample];
      p.t = static_cast<double>(i) / kFilterRateHz;
      traj.poses.push_back(p);
    }
    return traj;
  }

 private:
  CellIndex random_reachable() {
    std::uniform_int_distribution<std::size_t> pick(0, reachable_.size() - 1);
    return reachable_[pick(rng_)];
  }

  bool plan_leg(const Pose& from, std::vector<Point2>& waypoints) {
    const CellIndex here = nearest_free(planning_, map_.cell_of(from.position()));
    CellIndex goal = random_reachable();
    for (int tries = 0; tries < 20; ++tries) {
      const double dx = (goal.x - here.x) * map_.resolution(), dy = (goal.y - here.y) * map_.resolution();
      if (std::hypot(dx, dy) >= 4.0) break;
      goal = random_reachable();
    }
    auto path = plan_path(planning_, here, goal);
    if (!path || path->size() < 2) return false;
    waypoints = shortcut_path(planning_, *path);
    waypoints.front() = from.position();
    return waypoints.size() >= 2;
  }

  // Simulates at kSimDt until the last waypoint is reached or `max_steps`
  // steps are taken. The final leg of a run is padded so the run ends on a
  // sample boundary.
  std::vector<Pose> follow(Pose pose, const std::vector<Point2>& waypoints, int max_steps, int step_offset) {
    std::uniform_real_distribution<double> jitter(0.9, 1.1);
    const double speed = params_.speed * jitter(rng_);
    std::vector<Pose> out;
    std::size_t k = 1;
    int steps = 0;
    while (steps < max_steps) {
      while (k < waypoints.size() &&
             std::hypot(waypoints[k].x - pose.x, waypoints[k].y - pose.y) < params_.reach_radius)
        ++k;
      if (k >= waypoints.size() && (step_offset + steps) % kSimStepsPerSample == 0) break;
      const Point2 target = waypoints[std::min(k, waypoints.size() - 1)];
      const double err = wrap_angle(std::atan2(target.y - pose.y, target.x - pose.x) - pose.theta);
      const double omega = std::clamp(3.0 * err, -params_.max_turn_rate, params_.max_turn_rate);
      const double dtheta = omega * kSimDt;
      double v = k >= waypoints.size() ? 0.0 : speed * std::max(0.15, std::cos(err));
      if (k + 1 >= waypoints.size()) {
        const double remaining = std::hypot(target.x - pose.x, target.y - pose.y);
        v = std::min(v, remaining / kSimDt);
      }
      if (profile_ == MotionProfile::Wheeled) {
        const double denom = 2.0 * std::numbers::pi * kWheelRadius;
        const double revs_right = (v + omega * kTrackWidth / 2.0) * kSimDt / denom;
        const double revs_left = (v - omega * kTrackWidth / 2.0) * kSimDt / denom;
        pose = diff_drive_step(pose, revs_left, revs_right, dtheta, kWheelRadius, kSimDt);
      } else {
        pose = advance(pose, v * kSimDt, dtheta, kSimDt);
      }
      out.push_back(pose);
      ++steps;
    }
    return out;
  }

  bool leg_feasible(const std::vector<Pose>& sim, const std::vector<Pose>& leg) const {
    Pose prev = sim.back();
    for (const Pose& p : leg) {
      if (segment_hits_obstacle(map_, prev.position(), p.position())) return false;
      prev = p;
    }
    // chords between 1 Hz samples must stay free as well
    const std::size_t base = sim.size() - 1;
    const auto pos_at = [&](std::size_t i) {
      return i <= base ? sim[i].position() : leg[i - base - 1].position();
    };
    const std::size_t k = kSimStepsPerSample;
    for (std::size_t s = (base / k + 1) * k; s <= base + leg.size(); s += k)
      if (segment_hits_obstacle(map_, pos_at(s - k), pos_at(s))) return false;
    return true;
  }

  const OccupancyMap& map_;
  MotionProfile profile_;
  ProfileParams params_;
  OccupancyMap planning_;
  Components components_;
  int main_label_ = 0;
  std::vector<CellIndex> reachable_;
  std::mt19937_64 rng_;
};

}  // namespace

Trajectory generate_trajectory(const OccupancyMap& map, std::uint64_t seed, double duration_s,
                               MotionProfile profile) {
  if (!(duration_s >= 1.0 / kFilterRateHz) || !std::isfinite(duration_s))
    throw SimulationError("duration must be at least one sampling period");
  Walker walker(map, seed, profile);
  Trajectory traj = walker.run(duration_s);
  traj.validate(&map);
  return traj;
}

// --- odometry -----------------------------------------------------------------

OdometryStream ground_truth_odometry(const Trajectory& traj) {
  OdometryStream out;
  for (std::size_t i = 1; i < traj.poses.size(); ++i) {
    const Pose& a = traj.poses[i - 1];
    const Pose& b = traj.poses[i];
    out.push_back({b.t, b.x - a.x, b.y - a.y, wrap_angle(b.theta - a.theta)});
  }
  return out;
}

OdometryStream corrupt_to_odometry(const Trajectory& traj, const NoiseProfile& noise, double resolution,
                                   std::uint64_t seed) {
  if (noise.velocity_bias_sigma < 0 || noise.additive_sigma_cells < 0 || noise.heading_drift_sigma < 0)
    throw std::invalid_argument("noise sigmas must be nonnegative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const OdometryStream truth = ground_truth_odometry(traj);
  const double additive = noise.additive_sigma_cells * resolution;
  const double t0 = traj.poses.empty() ? 0.0 : traj.poses.front().t;

  OdometryStream out;
  out.reserve(truth.size());
  long segment = -1;
  double bias = 1.0;
  double drift = 0.0;
  for (const OdometrySample& d : truth) {
    const long seg = noise.bias_period_s > 0
                         ? static_cast<long>(std::floor((d.t - t0 - 1e-9) / noise.bias_period_s))
                         : 0;
    if (seg != segment) {
      segment = seg;
      bias = noise.forced_bias ? *noise.forced_bias : 1.0 + noise.velocity_bias_sigma * unit(rng);
    }
    double dx = bias * d.dx;
    double dy = bias * d.dy;
    double dtheta = d.dtheta;
    if (noise.heading_drift_sigma > 0) {
      const double e = noise.heading_drift_sigma * unit(rng);
      drift += e;
      dtheta += e;
      const double c = std::cos(drift), s = std::sin(drift);
      const double rx = c * dx - s * dy;
      dy = s * dx + c * dy;
      dx = rx;
    }
    if (additive > 0) {
      dx += additive * unit(rng);
      dy += additive * unit(rng);
    }
    out.push_back({d.t, dx, dy, dtheta});
  }
  return out;
}

Trajectory integrate_odometry(const OdometryStream& odom, const Pose& start) {
  Trajectory traj;
  traj.poses.push_back(start);
  for (const OdometrySample& s : odom) {
    Pose p = traj.poses.back();
    p.t = s.t;
    p.x += s.dx;
    p.y += s.dy;
    p.theta = wrap_angle(p.theta + s.dtheta);
    traj.poses.push_back(p);
  }
  return traj;
}

// --- windows ------------------------------------------------------------------

namespace {

std::size_t window_len_checked(double n_seconds, double rate_hz) {
  if (!(n_seconds > 0) || !(rate_hz > 0)) throw std::invalid_argument("window length and rate must be positive");
  const long len = std::lround(n_seconds * rate_hz);
  if (len < 1) throw std::invalid_argument("window shorter than one sample");
  return static_cast<std::size_t>(len);
}

void check_period(const std::vector<double>& times, double rate_hz) {
  for (std::size_t i = 1; i < times.size(); ++i)
    if (std::abs((times[i] - times[i - 1]) - 1.0 / rate_hz) > 1e-6)
      throw std::invalid_argument("stream is not sampled at " + std::to_string(rate_hz) + " Hz");
}

std::vector<TrajectoryWindow> sliding(const std::vector<Vec2>& positions, std::size_t len) {
  if (positions.size() < len)
    throw std::invalid_argument("stream too short: " + std::to_string(positions.size()) + " samples, window needs " +
                                std::to_string(len));
  std::vector<TrajectoryWindow> out;
  out.reserve(positions.size() - len + 1);
  for (std::size_t end = len - 1; end < positions.size(); ++end)
    out.push_back(window_ending_at(positions, end, len));
  return out;
}

}  // namespace

TrajectoryWindow window_ending_at(std::span<const Vec2> positions, std::size_t end, std::size_t length) {
  if (length == 0 || end >= positions.size() || end + 1 < length)
    throw std::invalid_argument("window out of range");
  TrajectoryWindow w;
  w.positions.reserve(length);
  const Vec2 first = positions[end + 1 - length];
  for (std::size_t i = end + 1 - length; i <= end; ++i)
    w.positions.push_back({positions[i].x - first.x, positions[i].y - first.y});
  return w;
}

std::vector<TrajectoryWindow> window(const OdometryStream& stream, double n_seconds, double rate_hz) {
  const std::size_t len = window_len_checked(n_seconds, rate_hz);
  std::vector<double> times;
  std::vector<Vec2> positions;
  Vec2 acc;
  for (const OdometrySample& s : stream) {
    acc.x += s.dx;
    acc.y += s.dy;
    positions.push_back(acc);
    times.push_back(s.t);
  }
  check_period(times, rate_hz);
  return sliding(positions, len);
}

std::vector<TrajectoryWindow> window(const Trajectory& traj, double n_seconds, double rate_hz) {
  const std::size_t len = window_len_checked(n_seconds, rate_hz);
  std::vector<double> times;
  std::vector<Vec2> positions;
  for (const Pose& p : traj.poses) {
    positions.push_back({p.x, p.y});
    times.push_back(p.t);
  }
  check_period(times, rate_hz);
  return sliding(positions, len);
}

// --- steps --------------------------------------------------------------------

StepEvents synthesize_steps(const Trajectory& traj, const StepNoise& noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const auto next_stride = [&] {
    return std::max(0.3, noise.stride_mean_m + noise.stride_sigma_m * unit(rng));
  };
  StepEvents out;
  double drift = 0.0;
  double stride = next_stride();
  double travelled = 0.0;
  for (std::size_t i = 1; i < traj.poses.size(); ++i) {
    const Pose& a = traj.poses[i - 1];
    const Pose& b = traj.poses[i];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    if (len <= 0) continue;
    const double heading = std::atan2(b.y - a.y, b.x - a.x);
    double along = 0.0;
    while (travelled + (len - along) >= stride) {
      along += stride - travelled;
      travelled = 0.0;
      const double frac = along / len;
      out.t.push_back(a.t + frac * (b.t - a.t));
      drift += noise.heading_drift_rad_per_step * unit(rng);
      out.heading.push_back(wrap_angle(heading + drift + noise.heading_noise_rad * unit(rng)));
      stride = next_stride();
    }
    travelled += len - along;
  }
  return out;
}

// --- CSV ----------------------------------------------------------------------

namespace {

void append_number(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

std::vector<std::vector<double>> read_csv(const std::filesystem::path& path, std::string_view header,
                                          std::size_t columns) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw IoError(path.string() + ": expected header '" + std::string(header) + "'");
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      double v = 0;
      auto res = std::from_chars(p, comma, v);
      if (res.ec != std::errc() || res.ptr != comma)
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad number");
      row.push_back(v);
      p = comma + 1;
    }
    if (row.size() != columns)
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(columns) +
                    " columns");
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_rows(std::string_view header, const std::vector<std::vector<double>>& rows) {
  std::string out(header);
  out.push_back('\n');
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out.push_back(',');
      append_number(out, row[i]);
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::vector<std::vector<double>> rows;
  for (const Pose& p : traj.poses) rows.push_back({p.t, p.x, p.y, p.theta});
  write_file_atomic(path, format_rows("t,x,y,theta", rows));
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  Trajectory traj;
  for (const auto& r : read_csv(path, "t,x,y,theta", 4)) traj.poses.push_back({r[0], r[1], r[2], r[3]});
  return traj;
}

void write_odometry_csv(const std::filesystem::path& path, const OdometryStream& odom) {
  std::vector<std::vector<double>> rows;
  for (const OdometrySample& s : odom) rows.push_back({s.t, s.dx, s.dy, s.dtheta});
  write_file_atomic(path, format_rows("t,dx,dy,dtheta", rows));
}

OdometryStream read_odometry_csv(const std::filesystem::path& path) {
  OdometryStream out;
  for (const auto& r : read_csv(path, "t,dx,dy,dtheta", 4)) out.push_back({r[0], r[1], r[2], r[3]});
  return out;
}

void write_steps_csv(const std::filesystem::path& path, const StepEvents& steps) {
  if (steps.t.size() != steps.heading.size()) throw std::invalid_argument("step stream mismatch");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < steps.t.size(); ++i) rows.push_back({steps.t[i], steps.heading[i]});
  write_file_atomic(path, format_rows("t,heading", rows));
}

StepEvents read_steps_csv(const std::filesystem::path& path) {
  StepEvents out;
  for (const auto& r : read_csv(path, "t,heading", 2)) {
    out.t.push_back(r[0]);
    out.heading.push_back(r[1]);
  }
  return out;
}

}  // namespace mapprior
