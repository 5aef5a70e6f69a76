#include "mapprior/baselines.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mapprior/metrics.hpp"
#include "mapprior/target.hpp"

namespace mapprior {

Grid<double> heuristic_prior(const OccupancyMap& map, const TrajectoryWindow& window) {
  return cross_correlate(map, rasterize_kernel(window, map.resolution()));
}

Trajectory pdr(const StepEvents& steps, const Pose& start, double step_length) {
  if (steps.t.size() != steps.heading.size())
    throw std::invalid_argument("pdr: " + std::to_string(steps.t.size()) + " step times but " +
                                std::to_string(steps.heading.size()) + " headings");
  Trajectory out;
  out.poses.push_back(start);
  for (std::size_t i = 0; i < steps.t.size(); ++i) {
    Pose p = out.poses.back();
    p.t = steps.t[i];
    p.theta = wrap_angle(steps.heading[i]);
    p.x += step_length * std::cos(steps.heading[i]);
    p.y += step_length * std::sin(steps.heading[i]);
    out.poses.push_back(p);
  }
  return out;
}

std::size_t LocationGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& nb : neighbors) n += nb.size();
  return n / 2;
}

LocationGraph build_graph(const OccupancyMap& map, double edge_length) {
  if (!(edge_length >= map.resolution()))
    throw std::invalid_argument("build_graph: edge_length must be >= map resolution");
  const double w = map.width() * map.resolution(), h = map.height() * map.resolution();
  const int nx = static_cast<int>(std::floor(w / edge_length)), ny = static_cast<int>(std::floor(h / edge_length));
  Grid<int> lattice(std::max(nx, 0), std::max(ny, 0), -1);
  std::vector<Point2> pts;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Point2 p{map.origin().x + (i + 0.5) * edge_length, map.origin().y + (j + 0.5) * edge_length};
      if (!is_free(map, p)) continue;
      lattice(i, j) = static_cast<int>(pts.size());
      pts.push_back(p);
    }
  if (pts.empty()) throw std::invalid_argument("build_graph: no free nodes");
  std::vector<std::vector<int>> adj(pts.size());
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int a = lattice(i, j);
      if (a < 0) continue;
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          if (di == 0 && dj == 0) continue;
          const CellIndex n{i + di, j + dj};
          if (!lattice.contains(n) || lattice[n] < 0) continue;
          if (segment_hits_obstacle(map, pts[static_cast<std::size_t>(a)], pts[static_cast<std::size_t>(lattice[n])]))
            continue;
          adj[static_cast<std::size_t>(a)].push_back(lattice[n]);
        }
    }
  // largest component, lowest first node on ties
  std::vector<int> comp(pts.size(), -1);
  int best = -1;
  std::size_t best_size = 0;
  for (std::size_t s = 0, label = 0; s < pts.size(); ++s) {
    if (comp[s] >= 0) continue;
    std::vector<int> stack{static_cast<int>(s)};
    comp[s] = static_cast<int>(label);
    std::size_t size = 0;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      ++size;
      for (int u : adj[static_cast<std::size_t>(v)])
        if (comp[static_cast<std::size_t>(u)] < 0) {
          comp[static_cast<std::size_t>(u)] = static_cast<int>(label);
          stack.push_back(u);
        }
    }
    if (size > best_size) {
      best_size = size;
      best = static_cast<int>(label);
    }
    ++label;
  }
  LocationGraph g;
  g.edge_length = edge_length;
  std::vector<int> remap(pts.size(), -1);
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (comp[i] == best) {
      remap[i] = static_cast<int>(g.nodes.size());
      g.nodes.push_back(pts[i]);
    }
  g.neighbors.resize(g.nodes.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (remap[i] < 0) continue;
    for (int u : adj[i]) g.neighbors[static_cast<std::size_t>(remap[i])].push_back(remap[static_cast<std::size_t>(u)]);
    std::sort(g.neighbors[static_cast<std::size_t>(remap[i])].begin(),
              g.neighbors[static_cast<std::size_t>(remap[i])].end());
  }
  return g;
}

std::vector<int> viterbi(const ChainProblem& p) {
  if (p.steps < 1 || p.nodes < 1) throw std::invalid_argument("viterbi: empty problem");
  if (p.predecessors && p.predecessors->size() != static_cast<std::size_t>(p.nodes))
    throw std::invalid_argument("viterbi: predecessor lists do not match node count");
  const auto n = static_cast<std::size_t>(p.nodes);
  constexpr double kNone = -std::numeric_limits<double>::infinity();
  std::vector<double> score(n), next(n);
  std::vector<std::vector<int>> back(static_cast<std::size_t>(p.steps), std::vector<int>(n, -1));
  for (std::size_t i = 0; i < n; ++i) score[i] = p.unary(0, static_cast<int>(i));
  for (int t = 1; t < p.steps; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      const int jj = static_cast<int>(j);
      // candidates: self plus listed predecessors, scanned in index order
      double best = kNone;
      int arg = -1;
      const auto consider = [&](int i) {
        if (score[static_cast<std::size_t>(i)] == kNone) return;
        const double v = score[static_cast<std::size_t>(i)] + p.pairwise(t, i, jj);
        if (v > best || (v == best && i < arg)) {
          best = v;
          arg = i;
        }
      };
      consider(jj);
      if (p.predecessors)
        for (int i : (*p.predecessors)[j]) consider(i);
      next[j] = arg < 0 ? kNone : best + p.unary(t, jj);
      back[static_cast<std::size_t>(t)][j] = arg;
    }
    score.swap(next);
  }
  std::size_t end = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (score[i] > score[end]) end = i;
  std::vector<int> path(static_cast<std::size_t>(p.steps));
  path.back() = static_cast<int>(end);
  for (int t = p.steps - 1; t > 0; --t)
    path[static_cast<std::size_t>(t - 1)] = back[static_cast<std::size_t>(t)][static_cast<std::size_t>(path[static_cast<std::size_t>(t)])];
  return path;
}

Trajectory crf_match(const LocationGraph& graph, const OdometryStream& odom, const Pose& start,
                     const CrfParams& params) {
  if (graph.nodes.empty()) throw std::invalid_argument("crf_match: empty graph");
  double nearest = std::numeric_limits<double>::infinity();
  for (const Point2& n : graph.nodes) nearest = std::min(nearest, std::hypot(n.x - start.x, n.y - start.y));
  if (nearest > 2.0 * graph.edge_length)
    throw std::invalid_argument("crf_match: start is not connected to the location graph");

  const Trajectory dead = integrate_odometry(odom, start);
  ChainProblem p;
  p.steps = static_cast<int>(dead.poses.size());
  p.nodes = static_cast<int>(graph.nodes.size());
  p.predecessors = &graph.neighbors;  // edges are symmetric
  p.unary = [&](int t, int i) {
    const Pose& d = dead.poses[static_cast<std::size_t>(t)];
    const Point2& n = graph.nodes[static_cast<std::size_t>(i)];
    return -params.unary_weight * ((n.x - d.x) * (n.x - d.x) + (n.y - d.y) * (n.y - d.y));
  };
  p.pairwise = [&](int t, int i, int j) {
    const OdometrySample& o = odom[static_cast<std::size_t>(t - 1)];
    const Point2& a = graph.nodes[static_cast<std::size_t>(i)];
    const Point2& b = graph.nodes[static_cast<std::size_t>(j)];
    const double ex = (b.x - a.x) - o.dx, ey = (b.y - a.y) - o.dy;
    return -params.pairwise_weight * (ex * ex + ey * ey);
  };
  const std::vector<int> path = viterbi(p);
  Trajectory out;
  for (std::size_t t = 0; t < path.size(); ++t) {
    const Point2& n = graph.nodes[static_cast<std::size_t>(path[t])];
    out.poses.push_back({dead.poses[t].t, n.x, n.y, dead.poses[t].theta});
  }
  return out;
}

CrfParams grid_search_crf(const OccupancyMap& map, const std::vector<CrfValidationRun>& runs) {
  if (runs.empty()) throw std::invalid_argument("grid_search_crf: no validation runs");
  CrfParams best;
  double best_ate = std::numeric_limits<double>::infinity();
  for (double edge : {0.5, 1.0, 2.0}) {
    const LocationGraph graph = build_graph(map, edge);
    for (double wu : {0.1, 1.0, 10.0})
      for (double wp : {0.1, 1.0, 10.0}) {
        const CrfParams params{wu, wp, edge};
        double sum = 0.0;
        try {
          for (const CrfValidationRun& r : runs)
            sum += ate(crf_match(graph, r.odom, r.truth.poses.front(), params), r.truth);
        } catch (const std::invalid_argument&) {
          continue;  // start off this graph
        }
        if (sum < best_ate) {
          best_ate = sum;
          best = params;
        }
      }
  }
  return best;
}

}  // namespace mapprior
