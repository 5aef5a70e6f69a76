#include "mapprior/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "mapprior/io.hpp"

namespace mapprior {

TrajectoryError trajectory_error(const Trajectory& est, const Trajectory& gt) {
  if (est.poses.empty() || gt.poses.empty()) throw MetricsError("trajectory_error: empty trajectory");
  const double half = gt.poses.size() >= 2 ? 0.5 * gt.period() : 0.5;
  TrajectoryError e;
  double sq = 0.0;
  std::size_t j = 0;
  for (const Pose& g : gt.poses) {
    // est is time ordered: advance while the next estimate is at least as close
    while (j + 1 < est.poses.size() && std::abs(est.poses[j + 1].t - g.t) <= std::abs(est.poses[j].t - g.t)) ++j;
    const Pose& p = est.poses[j];
    if (std::abs(p.t - g.t) > half + 1e-9) {
      ++e.unmatched;
      continue;
    }
    const double d = std::hypot(p.x - g.x, p.y - g.y);
    e.per_step_errors.push_back(d);
    sq += d * d;
  }
  if (e.per_step_errors.empty()) throw MetricsError("trajectory_error: no overlapping timestamps");
  e.ate = std::sqrt(sq / static_cast<double>(e.per_step_errors.size()));
  e.ee = end_error(est, gt);
  return e;
}

double ate(const Trajectory& est, const Trajectory& gt) { return trajectory_error(est, gt).ate; }

double end_error(const Trajectory& est, const Trajectory& gt) {
  if (est.poses.empty() || gt.poses.empty()) throw MetricsError("end_error: empty trajectory");
  const Pose& a = est.poses.back();
  const Pose& b = gt.poses.back();
  return std::hypot(a.x - b.x, a.y - b.y);
}

std::vector<std::pair<double, double>> cdf_points(std::vector<double> errors) {
  if (errors.empty()) throw MetricsError("cdf_points: no errors");
  std::sort(errors.begin(), errors.end());
  std::vector<std::pair<double, double>> out;
  const auto n = static_cast<double>(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    // one point per distinct value, at the fraction of values <= it
    if (i + 1 < errors.size() && errors[i + 1] == errors[i]) continue;
    out.emplace_back(errors[i], static_cast<double>(i + 1) / n);
  }
  return out;
}

Grid<double> gaussian_location_distribution(const OccupancyMap& map, Point2 truth, double sigma) {
  if (!(sigma > 0)) throw MetricsError("gaussian sigma must be positive");
  Grid<double> g(map.width(), map.height(), 0.0);
  double sum = 0.0;
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x) {
      if (!map.free(x, y)) continue;
      const Point2 c = map.center_of({x, y});
      const double d2 = (c.x - truth.x) * (c.x - truth.x) + (c.y - truth.y) * (c.y - truth.y);
      g(x, y) = std::exp(-0.5 * d2 / (sigma * sigma));
      sum += g(x, y);
    }
  if (!(sum > 0)) throw MetricsError("gaussian has no mass on free cells");
  for (double& v : g.storage()) v /= sum;
  return g;
}

double prior_kl(const Grid<double>& prior, const OccupancyMap& map, Point2 truth, double sigma) {
  if (prior.width() != map.width() || prior.height() != map.height())
    throw MetricsError("prior_kl: prior and map sizes differ");
  const Grid<double> g = gaussian_location_distribution(map, truth, sigma);
  double mass = 0.0;
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x)
      if (map.free(x, y)) mass += std::max(prior(x, y), kPriorFloor);
  if (!(mass > 0) || !std::isfinite(mass)) throw MetricsError("prior_kl: prior has no mass");
  double kl = 0.0;
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x) {
      const double gv = g(x, y);
      if (gv <= 0) continue;
      const double pv = std::max(prior(x, y), kPriorFloor) / mass;
      kl += gv * std::log(gv / pv);
    }
  return std::max(kl, 0.0);
}

void write_cdf_csv(const std::filesystem::path& path, const std::vector<std::pair<double, double>>& points) {
  std::string out = "error_m,fraction\n";
  char buf[64];
  for (const auto& [e, f] : points) {
    out.append(buf, std::to_chars(buf, buf + sizeof buf, e).ptr);
    out += ',';
    out.append(buf, std::to_chars(buf, buf + sizeof buf, f).ptr);
    out += '\n';
  }
  write_file_atomic(path, out);
}

}  // namespace mapprior
