#include "mapprior/particle_filter.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "mapprior/baselines.hpp"

namespace mapprior {

FilterConfig FilterConfig::for_profile(MotionProfile mode) {
  FilterConfig c;
  c.mode = mode;
  c.window_len = window_length(mode);
  // Sigma is a covariance: 0.1 I (pedestrian), 0.01 I (wheeled).
  c.motion_sigma = std::sqrt(mode == MotionProfile::Pedestrian ? 0.1 : 0.01);
  return c;
}

void FilterConfig::validate() const {
  if (particle_count < 1) throw std::invalid_argument("filter: particle_count must be >= 1");
  if (init_sigma < 0 || motion_sigma < 0) throw std::invalid_argument("filter: sigmas must be >= 0");
  if (!(reinit_fraction > 0 && reinit_fraction <= 1)) throw std::invalid_argument("filter: reinit_fraction in (0,1]");
  if (!(reinit_radius > 0)) throw std::invalid_argument("filter: reinit_radius must be > 0");
  if (!(rate_hz > 0)) throw std::invalid_argument("filter: rate must be > 0");
  if (window_len < 1) throw std::invalid_argument("filter: window_len must be >= 1");
}

ParticleSet init_particles(const Pose& start, const FilterConfig& config, Rng& rng) {
  config.validate();
  std::normal_distribution<double> unit(0.0, 1.0);
  ParticleSet ps(static_cast<std::size_t>(config.particle_count));
  const double w = 1.0 / static_cast<double>(ps.size());
  for (Particle& p : ps) {
    p.x = start.x + config.init_sigma * unit(rng);
    p.y = start.y + config.init_sigma * unit(rng);
    p.theta = config.mode == MotionProfile::Wheeled ? wrap_angle(start.theta + config.init_sigma * unit(rng))
                                                    : start.theta;
    p.weight = w;
  }
  return ps;
}

void propagate(ParticleSet& particles, const OdometrySample& odom, const OccupancyMap& map,
               const FilterConfig& config, Rng& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  const double sigma = config.motion_sigma;
  const double s = std::hypot(odom.dx, odom.dy);
  for (Particle& p : particles) {
    const Point2 from{p.x, p.y};
    if (config.mode == MotionProfile::Pedestrian) {
      p.x += odom.dx;
      p.y += odom.dy;
      if (sigma > 0) {
        p.x += sigma * unit(rng);
        p.y += sigma * unit(rng);
      }
    } else {
      p.x += s * std::cos(p.theta);
      p.y += s * std::sin(p.theta);
      double dtheta = odom.dtheta;
      if (sigma > 0) {
        p.x += sigma * unit(rng);
        p.y += sigma * unit(rng);
        dtheta += sigma * unit(rng);
      }
      p.theta = wrap_angle(p.theta + dtheta);
    }
    p.hit_obstacle = segment_hits_obstacle(map, from, {p.x, p.y});
  }
}

bool reweight(ParticleSet& particles, const Grid<double>& heatmap, const OccupancyMap& map) {
  if (heatmap.width() != map.width() || heatmap.height() != map.height())
    throw std::invalid_argument("reweight: heatmap does not cover the map");
  double sum = 0.0;
  bool any_above = false;
  for (Particle& p : particles) {
    const CellIndex c = map.cell_of({p.x, p.y});
    double v = map.in_bounds(c) ? heatmap[c] : kWeightFloor;
    if (!(v > kWeightFloor)) v = kWeightFloor;  // also catches NaN
    else any_above = true;
    p.weight = v;
    sum += v;
  }
  if (!any_above || !std::isfinite(sum)) {
    for (Particle& p : particles) p.weight = 1.0 / static_cast<double>(particles.size());
    return true;
  }
  for (Particle& p : particles) p.weight /= sum;
  return false;
}

std::vector<std::size_t> low_variance_indices(std::span<const double> weights, double u0) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> out;
  out.reserve(n);
  if (n == 0) return out;
  double c = weights[0];
  std::size_t i = 0;
  const double step = 1.0 / static_cast<double>(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double u = u0 + static_cast<double>(m) * step;
    while (u >= c && i + 1 < n) c += weights[++i];
    out.push_back(i);
  }
  return out;
}

void resample_low_variance(ParticleSet& particles, Rng& rng) {
  if (particles.empty()) return;
  std::vector<double> w(particles.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < particles.size(); ++i) sum += w[i] = particles[i].weight;
  if (!(sum > 0) || !std::isfinite(sum)) throw std::invalid_argument("resample: zero total weight");
  for (double& v : w) v /= sum;
  std::uniform_real_distribution<double> offset(0.0, 1.0 / static_cast<double>(particles.size()));
  const auto idx = low_variance_indices(w, offset(rng));
  ParticleSet out;
  out.reserve(particles.size());
  const double uniform = 1.0 / static_cast<double>(particles.size());
  for (std::size_t i : idx) {
    out.push_back(particles[i]);
    out.back().weight = uniform;
  }
  particles.swap(out);
}

namespace {

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace

std::size_t estimate_index(const ParticleSet& particles) {
  if (particles.empty()) throw std::invalid_argument("estimate: empty particle set");
  std::vector<double> xs, ys;
  xs.reserve(particles.size());
  ys.reserve(particles.size());
  for (const Particle& p : particles) {
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  const double mx = median(std::move(xs)), my = median(std::move(ys));
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < particles.size(); ++i) {
    const double d = (particles[i].x - mx) * (particles[i].x - mx) + (particles[i].y - my) * (particles[i].y - my);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Pose estimate(const ParticleSet& particles) {
  const Particle& p = particles[estimate_index(particles)];
  return {0.0, p.x, p.y, p.theta};
}

bool maybe_reinit(ParticleSet& particles, const Pose& last, const OccupancyMap& map, const FilterConfig& config,
                  Rng& rng) {
  std::size_t hits = 0;
  for (const Particle& p : particles) hits += p.hit_obstacle ? 1 : 0;
  for (Particle& p : particles) p.hit_obstacle = false;
  if (particles.empty() ||
      !(static_cast<double>(hits) > config.reinit_fraction * static_cast<double>(particles.size())))
    return false;

  const double diagonal = std::hypot(map.width(), map.height()) * map.resolution();
  std::vector<CellIndex> cells;
  double radius = config.reinit_radius;
  while (true) {
    cells.clear();
    const CellIndex lo = map.cell_of({last.x - radius, last.y - radius});
    const CellIndex hi = map.cell_of({last.x + radius, last.y + radius});
    for (int y = std::max(lo.y, 0); y <= std::min(hi.y, map.height() - 1); ++y)
      for (int x = std::max(lo.x, 0); x <= std::min(hi.x, map.width() - 1); ++x) {
        if (!map.free(x, y)) continue;
        const Point2 c = map.center_of({x, y});
        if (std::hypot(c.x - last.x, c.y - last.y) <= radius) cells.push_back({x, y});
      }
    if (!cells.empty()) break;
    if (radius >= diagonal) throw std::runtime_error("reinit: no free space around the last estimate");
    radius = std::min(2.0 * radius, diagonal);
  }

  std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
  std::uniform_real_distribution<double> in_cell(0.0, 1.0);
  std::uniform_real_distribution<double> heading(-std::numbers::pi, std::numbers::pi);
  const double w = 1.0 / static_cast<double>(particles.size());
  const double res = map.resolution();
  for (Particle& p : particles) {
    // uniform within the chosen cell, rejecting the sliver outside the disc
    Point2 q;
    do {
      const CellIndex c = cells[pick(rng)];
      q = {map.origin().x + (c.x + in_cell(rng)) * res, map.origin().y + (c.y + in_cell(rng)) * res};
    } while (std::hypot(q.x - last.x, q.y - last.y) > radius);
    p.x = q.x;
    p.y = q.y;
    if (config.mode == MotionProfile::Wheeled) p.theta = wrap_angle(heading(rng));
    p.weight = w;
  }
  return true;
}

PriorKind parse_prior(std::string_view name) {
  if (name == "learned" || name == "ours") return PriorKind::Learned;
  if (name == "heuristic") return PriorKind::Heuristic;
  if (name == "none" || name == "odom") return PriorKind::None;
  throw std::invalid_argument("unknown prior '" + std::string(name) + "'");
}

const char* prior_name(PriorKind kind) {
  switch (kind) {
    case PriorKind::Learned: return "learned";
    case PriorKind::Heuristic: return "heuristic";
    case PriorKind::None: return "none";
    case PriorKind::Custom: return "custom";
  }
  return "none";
}

Grid<double> prior_heatmap(const PriorSource& prior, const OccupancyMap& map, const TrajectoryWindow& window) {
  switch (prior.kind) {
    case PriorKind::Heuristic:
      return heuristic_prior(map, window);
    case PriorKind::Learned: {
      if (!prior.model || !prior.map_tensor) throw ModelError("learned prior requires weights and a map tensor");
      if (prior.map_tensor->width() != map.width() || prior.map_tensor->height() != map.height())
        throw ModelError("map tensor was encoded from a different map");
      const std::vector<float> v = encode_odometry(window, map.resolution(), *prior.model);
      return score(*prior.map_tensor, v);
    }
    case PriorKind::Custom:
      if (!prior.custom) throw std::invalid_argument("custom prior without a heatmap function");
      return prior.custom(window);
    case PriorKind::None:
      break;
  }
  return Grid<double>(map.width(), map.height(), 1.0);
}

FilterResult run_filter(const OdometryStream& odom, const OccupancyMap& map, const PriorSource& prior,
                        const Pose& start, const FilterConfig& config, std::uint64_t seed) {
  config.validate();
  for (std::size_t i = 1; i < odom.size(); ++i)
    if (std::abs(odom[i].t - odom[i - 1].t - 1.0 / config.rate_hz) > 1e-6)
      throw std::invalid_argument("odometry is not sampled at the filter rate");

  PriorSource source = prior;
  std::optional<PriorModel> resized;
  if (prior.kind == PriorKind::Learned) {
    if (!prior.model || !prior.map_tensor) throw ModelError("learned prior requires weights and a map tensor");
    if (prior.model->config.window_len != config.window_len) {
      resized = prior.model->with_window_len(config.window_len);
      source.model = &*resized;
    }
  }

  Rng rng(seed);
  ParticleSet particles = init_particles(start, config, rng);
  FilterResult result;
  result.estimate.poses.push_back(start);
  const Trajectory dead = integrate_odometry(odom, start);
  std::vector<Vec2> positions;
  for (const Pose& p : dead.poses) positions.push_back({p.x, p.y});
  const auto len = static_cast<std::size_t>(config.window_len);

  for (std::size_t k = 0; k < odom.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    propagate(particles, odom[k], map, config, rng);
    const std::size_t end = k + 1;
    if (prior.kind != PriorKind::None && end + 1 >= len) {
      TrajectoryWindow w = window_ending_at(positions, end, len);
      if (config.mode == MotionProfile::Wheeled) {
        const std::size_t s = end + 1 - len;
        const double a = result.estimate.poses[s].theta - dead.poses[s].theta;
        const double c = std::cos(a), sn = std::sin(a);
        for (Vec2& p : w.positions) p = {c * p.x - sn * p.y, sn * p.x + c * p.y};
      }
      if (reweight(particles, prior_heatmap(source, map, w), map)) ++result.degenerate_count;
      resample_low_variance(particles, rng);
    }
    Pose est = estimate(particles);
    est.t = odom[k].t;
    if (prior.kind != PriorKind::None && maybe_reinit(particles, est, map, config, rng)) ++result.reinit_count;
    result.estimate.poses.push_back(est);
    result.step_ms.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return result;
}

}  // namespace mapprior
