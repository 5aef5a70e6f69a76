#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mapprior/baselines.hpp"
#include "mapprior/maps.hpp"
#include "oracles.hpp"

using namespace mapprior;

TEST_CASE("heuristic prior basics") {
  const OccupancyMap open = maps::open_box(10.0, 10.0);
  const TrajectoryWindow w{{{0, 0}, {1, 0}, {2, 0.5}, {3, 0.5}}};
  const Grid<double> h = heuristic_prior(open, w);
  const CellIndex end = open.cell_of({5.0, 5.0});
  CHECK(h[end] == doctest::Approx(1.0));
  for (double v : h.storage()) CHECK(v <= 1.0 + 1e-12);

  OccupancyMap walled = open;
  walled.fill_rect(0, 20, 39, 20, Cell::Occupied);
  const TrajectoryWindow crossing{{{0, 0}, {0, 1}, {0, 2}}};
  const Grid<double> hc = heuristic_prior(walled, crossing);
  for (int x = 0; x < walled.width(); ++x)
    for (int y = 20; y <= 20 + 8 && y < walled.height(); ++y) CHECK(hc(x, y) < 1.0);
  CHECK(hc == oracle::cross_correlate(walled, rasterize_kernel(crossing, 0.25).weights,
                                      rasterize_kernel(crossing, 0.25).anchor));
}

TEST_CASE("heuristic prior rates hallway-adjacent rooms like the hallway") {
  const OccupancyMap m = maps::hallway_with_side_rooms();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> jitter(0.0, 0.05);
  TrajectoryWindow w{{{0, 0}}};
  for (int i = 1; i < 5; ++i) w.positions.push_back({1.3 * i + jitter(rng), jitter(rng)});
  const Grid<double> h = heuristic_prior(m, w);
  double hall = 0, room = 0;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      const Point2 c = m.center_of({x, y});
      if (c.y > 7.0 && c.y < 9.0) hall = std::max(hall, h(x, y));
      if (c.y > 10.0 && c.y < 15.0) room = std::max(room, h(x, y));
    }
  CHECK(hall > 0.9);
  CHECK(std::abs(room - hall) <= 0.1 * hall);
}

TEST_CASE("pdr examples") {
  const Pose origin{};
  const Trajectory one = pdr({{1.0}, {0.0}}, origin);
  CHECK(one.poses.back().x == doctest::Approx(0.67));
  CHECK(one.poses.back().y == doctest::Approx(0.0));
  const double pi = std::numbers::pi;
  const Trajectory square = pdr({{1, 2, 3, 4}, {0, pi / 2, pi, 3 * pi / 2}}, origin);
  CHECK(square.poses.back().x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(square.poses.back().y) < 1e-12);
  for (std::size_t i = 1; i < square.size(); ++i)
    CHECK(std::hypot(square.poses[i].x - square.poses[i - 1].x, square.poses[i].y - square.poses[i - 1].y) ==
          doctest::Approx(0.67));
  StepEvents biased;
  for (int i = 0; i < 100; ++i) {
    biased.t.push_back(i + 1.0);
    biased.heading.push_back(0.01 * i);
  }
  const Trajectory curved = pdr(biased, origin);
  CHECK(std::hypot(curved.poses.back().x - 67.0, curved.poses.back().y) > 1.0);
  CHECK_THROWS(pdr({{1.0, 2.0}, {0.0}}, origin));
}

TEST_CASE("location graph construction") {
  const OccupancyMap open(40, 40, 0.25);
  const LocationGraph g = build_graph(open, 1.0);
  CHECK(g.nodes.size() == 100);
  int interior8 = 0;
  for (const auto& nb : g.neighbors) interior8 += nb.size() == 8 ? 1 : 0;
  CHECK(interior8 == 64);
  const LocationGraph fine = build_graph(open, 0.5);
  CHECK(fine.nodes.size() == 400);

  const OccupancyMap m = maps::corridor_rooms();
  const LocationGraph gm = build_graph(m, 1.0);
  for (std::size_t a = 0; a < gm.nodes.size(); ++a) {
    CHECK(is_free(m, gm.nodes[a]));
    for (int b : gm.neighbors[a]) CHECK_FALSE(segment_hits_obstacle(m, gm.nodes[a], gm.nodes[static_cast<std::size_t>(b)]));
  }
  CHECK_THROWS(build_graph(open, 0.1));
  CHECK_THROWS(build_graph(OccupancyMap(8, 8, 0.25, {}, Cell::Occupied), 1.0));
}

TEST_CASE("viterbi matches exhaustive search") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int nodes = 1 + static_cast<int>(rng() % 6), steps = 1 + static_cast<int>(rng() % 5);
    std::vector<std::vector<int>> pred(static_cast<std::size_t>(nodes));
    for (int j = 0; j < nodes; ++j)
      for (int i = 0; i < nodes; ++i)
        if (i != j && rng() % 2) pred[static_cast<std::size_t>(j)].push_back(i);
    std::vector<double> un(static_cast<std::size_t>(nodes * steps)), pw(static_cast<std::size_t>(nodes * nodes * steps));
    for (double& v : un) v = u(rng);
    for (double& v : pw) v = u(rng);
    ChainProblem p;
    p.steps = steps;
    p.nodes = nodes;
    p.predecessors = &pred;
    p.unary = [&](int t, int i) { return un[static_cast<std::size_t>(t * nodes + i)]; };
    p.pairwise = [&](int t, int i, int j) { return pw[static_cast<std::size_t>((t * nodes + i) * nodes + j)]; };
    const auto [best, brute_path] = oracle::chain_map(p);
    const std::vector<int> path = viterbi(p);
    REQUIRE(path.size() == static_cast<std::size_t>(steps));
    double score = 0;
    for (int t = 0; t < steps; ++t) score += p.unary(t, path[t]) + (t ? p.pairwise(t, path[t - 1], path[t]) : 0.0);
    CHECK(score == doctest::Approx(best).epsilon(1e-12));
    CHECK(path == brute_path);
  }
}

TEST_CASE("crf recovers a noiseless on-graph path") {
  const OccupancyMap m = maps::corridor_rooms();
  const LocationGraph g = build_graph(m, 1.0);
  std::mt19937_64 rng(4);
  std::vector<int> nodes{0};
  for (int t = 0; t < 25; ++t) {
    const auto& nb = g.neighbors[static_cast<std::size_t>(nodes.back())];
    nodes.push_back(nb[rng() % nb.size()]);
  }
  OdometryStream odom;
  for (std::size_t t = 1; t < nodes.size(); ++t) {
    const Point2 a = g.nodes[static_cast<std::size_t>(nodes[t - 1])], b = g.nodes[static_cast<std::size_t>(nodes[t])];
    odom.push_back({double(t), b.x - a.x, b.y - a.y, 0.0});
  }
  const Point2 s = g.nodes[static_cast<std::size_t>(nodes[0])];
  const Trajectory out = crf_match(g, odom, {0, s.x, s.y, 0}, CrfParams{});
  REQUIRE(out.size() == nodes.size());
  for (std::size_t t = 0; t < nodes.size(); ++t) {
    CHECK(out.poses[t].x == g.nodes[static_cast<std::size_t>(nodes[t])].x);
    CHECK(out.poses[t].y == g.nodes[static_cast<std::size_t>(nodes[t])].y);
  }
  // every transition is a graph edge or a stay
  const Trajectory noisy = crf_match(g, corrupt_to_odometry(generate_trajectory(m, 2, 60, MotionProfile::Pedestrian),
                                                            NoiseProfile::pedestrian(), 0.25, 3),
                                     {0, s.x, s.y, 0}, CrfParams{});
  const auto index_of = [&](const Pose& p) {
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
      if (g.nodes[i].x == p.x && g.nodes[i].y == p.y) return static_cast<int>(i);
    return -1;
  };
  for (std::size_t t = 1; t < noisy.size(); ++t) {
    const int a = index_of(noisy.poses[t - 1]), b = index_of(noisy.poses[t]);
    REQUIRE(a >= 0);
    const auto& nb = g.neighbors[static_cast<std::size_t>(a)];
    CHECK((a == b || std::find(nb.begin(), nb.end(), b) != nb.end()));
  }
  CHECK_THROWS_AS(crf_match(g, odom, {0, -50, -50, 0}, CrfParams{}), std::invalid_argument);
}
