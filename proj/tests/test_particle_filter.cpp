#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mapprior/maps.hpp"
#include "mapprior/particle_filter.hpp"

using namespace mapprior;

namespace {

FilterConfig quiet(MotionProfile mode) {
  FilterConfig c = FilterConfig::for_profile(mode);
  c.motion_sigma = 0.0;
  c.init_sigma = 0.0;
  return c;
}

ParticleSet at(std::initializer_list<std::pair<double, double>> xy) {
  ParticleSet ps;
  for (auto [x, y] : xy) ps.push_back({x, y, 0.0, 1.0 / static_cast<double>(xy.size()), false});
  return ps;
}

PriorSource source(PriorKind kind) {
  PriorSource s;
  s.kind = kind;
  return s;
}

}  // namespace

TEST_CASE("profile defaults") {
  const FilterConfig p = FilterConfig::for_profile(MotionProfile::Pedestrian);
  CHECK(p.particle_count == 1000);
  CHECK(p.init_sigma == 0.01);
  CHECK(p.motion_sigma * p.motion_sigma == doctest::Approx(0.1));
  CHECK(p.window_len == 5);
  CHECK(p.reinit_radius == 5.0);
  CHECK(p.reinit_fraction == 0.9);
  const FilterConfig w = FilterConfig::for_profile(MotionProfile::Wheeled);
  CHECK(w.motion_sigma * w.motion_sigma == doctest::Approx(0.01));
  CHECK(w.window_len == 20);
  FilterConfig bad;
  bad.particle_count = 0;
  CHECK_THROWS(bad.validate());
  bad = FilterConfig{};
  bad.reinit_fraction = 1.5;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("propagate examples") {
  const OccupancyMap m(80, 80, 0.25);
  Rng rng(1);
  SUBCASE("pedestrian shift") {
    ParticleSet ps = at({{2, 3}});
    propagate(ps, {1, 1, -1, 0}, m, quiet(MotionProfile::Pedestrian), rng);
    CHECK(ps[0].x == 3.0);
    CHECK(ps[0].y == 2.0);
    CHECK_FALSE(ps[0].hit_obstacle);
  }
  SUBCASE("wheeled moves along the particle heading") {
    ParticleSet ps = at({{5, 5}});
    ps[0].theta = std::numbers::pi / 2;
    propagate(ps, {1, 1, 0, 0}, m, quiet(MotionProfile::Wheeled), rng);
    CHECK(ps[0].x == doctest::Approx(5.0));
    CHECK(ps[0].y == doctest::Approx(6.0));
    CHECK(ps[0].theta == doctest::Approx(std::numbers::pi / 2));
  }
  SUBCASE("zero motion, zero noise is the identity") {
    ParticleSet ps = at({{1, 1}, {4, 2}, {7.5, 3.25}});
    const ParticleSet before = ps;
    propagate(ps, {1, 0, 0, 0}, m, quiet(MotionProfile::Pedestrian), rng);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      CHECK(ps[i].x == before[i].x);
      CHECK(ps[i].y == before[i].y);
    }
  }
  SUBCASE("crossing a wall sets the flag") {
    OccupancyMap walled(m);
    walled.fill_rect(20, 0, 20, 79, Cell::Occupied);
    ParticleSet ps = at({{4.5, 5}, {1, 5}});
    propagate(ps, {1, 1.0, 0, 0}, walled, quiet(MotionProfile::Pedestrian), rng);
    CHECK(ps[0].hit_obstacle);
    CHECK_FALSE(ps[1].hit_obstacle);
  }
  SUBCASE("noise has the configured spread") {
    FilterConfig c = FilterConfig::for_profile(MotionProfile::Pedestrian);
    ParticleSet ps(20000, Particle{10, 10, 0, 1.0, false});
    propagate(ps, {1, 0, 0, 0}, m, c, rng);
    double s2 = 0;
    for (const Particle& p : ps) s2 += (p.x - 10) * (p.x - 10);
    CHECK(std::sqrt(s2 / ps.size()) == doctest::Approx(c.motion_sigma).epsilon(0.03));
  }
}

TEST_CASE("reweight examples") {
  const OccupancyMap m(4, 4, 1.0);
  ParticleSet ps = at({{0.5, 0.5}, {1.5, 0.5}, {2.5, 2.5}, {3.5, 3.5}});
  SUBCASE("uniform heatmap") {
    CHECK_FALSE(reweight(ps, Grid<double>(4, 4, 3.0), m));
    for (const Particle& p : ps) CHECK(p.weight == doctest::Approx(0.25));
  }
  SUBCASE("one cell") {
    Grid<double> h(4, 4, 0.0);
    h(2, 2) = 5.0;
    CHECK_FALSE(reweight(ps, h, m));
    CHECK(ps[2].weight == doctest::Approx(1.0));
    CHECK(ps[0].weight < 1e-11);
  }
  SUBCASE("negative scores are clamped to the floor") {
    Grid<double> h(4, 4, -2.0);
    h(0, 0) = 1.0;
    reweight(ps, h, m);
    CHECK(ps[0].weight == doctest::Approx(1.0));
    for (int i = 1; i < 4; ++i) CHECK(ps[i].weight == doctest::Approx(kWeightFloor).epsilon(1e-6));
  }
  SUBCASE("all at the floor is degenerate") {
    CHECK(reweight(ps, Grid<double>(4, 4, -1.0), m));
    for (const Particle& p : ps) CHECK(p.weight == 0.25);
  }
  SUBCASE("out of bounds gets the floor") {
    ps[3].x = 10;
    Grid<double> h(4, 4, 1.0);
    reweight(ps, h, m);
    CHECK(ps[3].weight < 1e-11);
  }
  CHECK_THROWS(reweight(ps, Grid<double>(3, 4, 1.0), m));
}

TEST_CASE("low-variance resampling") {
  SUBCASE("indices for (0.75, 0.25), p = 4") {
    const std::vector<double> w4{0.75, 0.25, 0.0, 0.0};
    for (double u0 : {0.0, 0.1, 0.2499}) {
      const auto idx = low_variance_indices(w4, u0);
      CHECK(std::count(idx.begin(), idx.end(), 0u) == 3);
      CHECK(std::count(idx.begin(), idx.end(), 1u) == 1);
    }
  }
  Rng rng(3);
  SUBCASE("one-hot weights") {
    ParticleSet ps = at({{1, 1}, {2, 2}, {3, 3}, {4, 4}, {5, 5}});
    for (Particle& p : ps) p.weight = 0.0;
    ps[0].weight = 1.0;
    resample_low_variance(ps, rng);
    CHECK(ps.size() == 5);
    for (const Particle& p : ps) {
      CHECK(p.x == 1.0);
      CHECK(p.weight == 0.2);
    }
  }
  SUBCASE("uniform weights keep every particle once") {
    ParticleSet ps;
    for (int i = 0; i < 100; ++i) ps.push_back({double(i), 0, 0, 0.01, false});
    resample_low_variance(ps, rng);
    for (int i = 0; i < 100; ++i) CHECK(ps[static_cast<std::size_t>(i)].x == double(i));
  }
  SUBCASE("copies are floor or ceil of p w") {
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
      ParticleSet ps;
      std::vector<double> w(37);
      double s = 0;
      for (double& v : w) s += v = u(rng);
      for (std::size_t i = 0; i < w.size(); ++i) ps.push_back({double(i), 0, 0, w[i] / s, false});
      resample_low_variance(ps, rng);
      std::vector<int> copies(w.size(), 0);
      for (const Particle& p : ps) ++copies[static_cast<std::size_t>(p.x)];
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double e = 37.0 * w[i] / s;
        CHECK(copies[i] >= static_cast<int>(std::floor(e)) - 0);
        CHECK(copies[i] <= static_cast<int>(std::ceil(e)));
      }
    }
  }
  SUBCASE("zero total weight throws") {
    ParticleSet ps = at({{1, 1}});
    ps[0].weight = 0.0;
    CHECK_THROWS_AS(resample_low_variance(ps, rng), std::invalid_argument);
  }
}

TEST_CASE("median-closest estimate") {
  CHECK(estimate_index(at({{0, 0}, {0, 1}, {10, 10}})) == 1);
  const Pose single = estimate(at({{3, 4}}));
  CHECK(single.x == 3.0);
  CHECK(single.y == 4.0);
  ParticleSet bimodal;
  for (int i = 0; i < 10; ++i) bimodal.push_back({0.0 + 0.01 * i, 0, 0, 0.05, false});
  for (int i = 0; i < 10; ++i) bimodal.push_back({10.0 + 0.01 * i, 0, 0, 0.05, false});
  const Pose e = estimate(bimodal);
  CHECK((e.x < 0.2 || e.x > 9.9));
  CHECK_THROWS(estimate_index(ParticleSet{}));
}

TEST_CASE("re-initialization") {
  const OccupancyMap m = maps::corridor_rooms();
  const FilterConfig c = FilterConfig::for_profile(MotionProfile::Pedestrian);
  Rng rng(5);
  const Pose last{0, 10.0, 10.0, 0};
  REQUIRE(is_free(m, last.position()));
  const auto flagged = [&](int n) {
    ParticleSet ps(1000, Particle{last.x, last.y, 0, 0.001, false});
    for (int i = 0; i < n; ++i) ps[static_cast<std::size_t>(i)].hit_obstacle = true;
    return ps;
  };
  ParticleSet ps = flagged(900);
  CHECK_FALSE(maybe_reinit(ps, last, m, c, rng));
  for (const Particle& p : ps) CHECK_FALSE(p.hit_obstacle);
  ps = flagged(950);
  CHECK(maybe_reinit(ps, last, m, c, rng));
  for (const Particle& p : ps) {
    CHECK(is_free(m, {p.x, p.y}));
    CHECK(std::hypot(p.x - last.x, p.y - last.y) <= 5.0);
    CHECK(p.weight == doctest::Approx(0.001));
  }
}

TEST_CASE("run_filter without a prior integrates odometry") {
  const OccupancyMap m = maps::corridor_rooms();
  const Trajectory gt = generate_trajectory(m, 3, 60.0, MotionProfile::Pedestrian);
  const OdometryStream odom = ground_truth_odometry(gt);
  FilterConfig c = quiet(MotionProfile::Pedestrian);
  c.particle_count = 50;
  const FilterResult r = run_filter(odom, m, PriorSource{}, gt.poses[0], c, 1);
  const Trajectory dead = integrate_odometry(odom, gt.poses[0]);
  REQUIRE(r.estimate.size() == dead.size());
  for (std::size_t i = 0; i < dead.size(); ++i) {
    CHECK(r.estimate.poses[i].x == doctest::Approx(dead.poses[i].x).epsilon(1e-9));
    CHECK(r.estimate.poses[i].y == doctest::Approx(dead.poses[i].y).epsilon(1e-9));
    CHECK(r.estimate.poses[i].t == dead.poses[i].t);
  }
  CHECK(r.step_ms.size() == odom.size());
}

TEST_CASE("run_filter is deterministic and checks its inputs") {
  const OccupancyMap m = maps::corridor_rooms();
  const Trajectory gt = generate_trajectory(m, 4, 40.0, MotionProfile::Pedestrian);
  const OdometryStream odom = corrupt_to_odometry(gt, NoiseProfile::pedestrian(), m.resolution(), 9);
  FilterConfig c = FilterConfig::for_profile(MotionProfile::Pedestrian);
  c.particle_count = 200;
  const PriorSource heur = source(PriorKind::Heuristic);
  const FilterResult a = run_filter(odom, m, heur, gt.poses[0], c, 11);
  const FilterResult b = run_filter(odom, m, heur, gt.poses[0], c, 11);
  CHECK(a.estimate == b.estimate);
  for (const Pose& p : a.estimate.poses) CHECK(std::isfinite(p.x));
  CHECK_THROWS_AS(run_filter(odom, m, source(PriorKind::Learned), gt.poses[0], c, 1), ModelError);
  OdometryStream gappy = odom;
  gappy[3].t += 0.5;
  CHECK_THROWS(run_filter(gappy, m, heur, gt.poses[0], c, 1));
}

// The filter advances along the old heading, the simulator along the new one,
// so a clean stream is followed closely but not exactly.
TEST_CASE("wheeled run_filter follows a clean stream") {
  const OccupancyMap m = maps::corridor_rooms();
  const Trajectory gt = generate_trajectory(m, 6, 120.0, MotionProfile::Wheeled);
  const OdometryStream odom = ground_truth_odometry(gt);
  FilterConfig c = quiet(MotionProfile::Wheeled);
  c.particle_count = 20;
  const FilterResult r = run_filter(odom, m, PriorSource{}, gt.poses[0], c, 1);
  CHECK(std::hypot(r.estimate.poses.back().x - gt.poses.back().x, r.estimate.poses.back().y - gt.poses.back().y) <
        0.5);
}
