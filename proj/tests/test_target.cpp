#include <doctest.h>

#include <cmath>
#include <random>

#include "mapprior/baselines.hpp"
#include "mapprior/maps.hpp"
#include "mapprior/target.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mapprior;

TEST_CASE("stationary window rasterizes to a single cell") {
  const TrajectoryKernel k = rasterize_kernel({{{0, 0}, {0.01, 0.0}, {0, 0.02}}}, 0.25);
  CHECK(k.width() == 1);
  CHECK(k.height() == 1);
  CHECK(k.weights(0, 0) == 1.0);
  CHECK(k.anchor == CellIndex{0, 0});
}

TEST_CASE("straight east-bound window spanning 4 cells") {
  const TrajectoryKernel k = rasterize_kernel({{{0, 0}, {0.25, 0}, {0.5, 0}, {0.75, 0}}}, 0.25);
  CHECK(k.width() == 4);
  CHECK(k.height() == 1);
  for (int x = 0; x < 4; ++x) CHECK(k.weights(x, 0) == 0.25);
  CHECK(k.anchor == CellIndex{3, 0});
}

TEST_CASE("kernel weights sum to one") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> step(0.0, 0.6);
  for (int trial = 0; trial < 200; ++trial) {
    TrajectoryWindow w{{{0, 0}}};
    for (int i = 0; i < 5; ++i) w.positions.push_back({w.positions.back().x + step(rng), w.positions.back().y + step(rng)});
    const TrajectoryKernel k = rasterize_kernel(w, 0.25);
    double sum = 0.0;
    for (double v : k.weights.storage()) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(k.weights(k.anchor.x, k.anchor.y) > 0.0);
  }
}

TEST_CASE("cross_correlate on all-free and all-occupied maps") {
  const TrajectoryKernel k = rasterize_kernel({{{0, 0}, {0.5, 0.25}, {0.75, 0.75}}}, 0.25);
  const OccupancyMap free_map(12, 10, 0.25);
  const Grid<double> t = cross_correlate(free_map, k);
  for (int y = k.anchor.y; y < free_map.height() - (k.height() - 1 - k.anchor.y); ++y)
    for (int x = k.anchor.x; x < free_map.width() - (k.width() - 1 - k.anchor.x); ++x)
      CHECK(t(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  const OccupancyMap occ(12, 10, 0.25, {}, Cell::Occupied);
  const Grid<double> none = cross_correlate(occ, k);
  for (double v : none.storage()) CHECK(v == 0.0);
}

TEST_CASE("one obstacle and a two-cell kernel") {
  OccupancyMap m(5, 5, 1.0);
  m.set({2, 2}, Cell::Occupied);
  TrajectoryKernel k{Grid<double>(2, 1, 0.5), {1, 0}};
  const Grid<double> t = cross_correlate(m, k);
  const Grid<double> ref = oracle::cross_correlate(m, k.weights, k.anchor);
  CHECK(t == ref);
  // Placements whose footprint holds the obstacle: end at (2,2) or (3,2).
  CHECK(t(2, 2) == 0.5);
  CHECK(t(3, 2) == 0.5);
  CHECK(t(4, 2) == 1.0);
  CHECK(t(1, 2) == 1.0);
  CHECK(t(0, 2) == 0.5);  // the tap left of the map is out of bounds
}

TEST_CASE("cross_correlate equals the brute-force overlap sum on random small instances") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 400; ++trial) {
    const int w = 1 + static_cast<int>(rng() % 16), h = 1 + static_cast<int>(rng() % 16);
    const OccupancyMap m = testutil::random_map(w, h, 0.35, rng);
    const int kw = 1 + static_cast<int>(rng() % std::min(5, w)), kh = 1 + static_cast<int>(rng() % std::min(5, h));
    TrajectoryKernel k{Grid<double>(kw, kh), {static_cast<int>(rng() % kw), static_cast<int>(rng() % kh)}};
    for (double& v : k.weights.storage()) v = u(rng) < 0.3 ? 0.0 : u(rng);
    REQUIRE(cross_correlate(m, k) == oracle::cross_correlate(m, k.weights, k.anchor));
  }
}

TEST_CASE("heuristic prior and target overlap share the oracle") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> step(0.0, 0.3);
  for (int trial = 0; trial < 100; ++trial) {
    const OccupancyMap m = testutil::random_map(16, 16, 0.3, rng);
    TrajectoryWindow w{{{0, 0}}};
    for (int i = 0; i < 4; ++i) w.positions.push_back({w.positions.back().x + step(rng), w.positions.back().y + step(rng)});
    const TrajectoryKernel k = rasterize_kernel(w, m.resolution());
    const Grid<double> ref = oracle::cross_correlate(m, k.weights, k.anchor);
    CHECK(heuristic_prior(m, w) == ref);
    CHECK(make_target(m, w).overlap == ref);
  }
}

TEST_CASE("target formula endpoints") {
  CHECK(target_value(0.0) == doctest::Approx(1e-6).epsilon(1e-12));
  CHECK(target_value(1.0) == doctest::Approx(1e-6 * std::exp(14.0)).epsilon(1e-12));
  CHECK(target_value(1.0) == doctest::Approx(1.2026).epsilon(1e-4));
}

TEST_CASE("inverse-area weights for two components") {
  Grid<std::uint8_t> mask(20, 10, 0);
  for (int x = 0; x < 10; ++x) mask(x, 0) = 1;         // area 10
  for (int y = 3; y < 7; ++y)
    for (int x = 5; x < 15; ++x) mask(x, y) = 1;      // area 40
  const Grid<double> w = inverse_area_weights(mask);
  CHECK(w(0, 0) == doctest::Approx(0.1));
  CHECK(w(9, 0) == doctest::Approx(0.1));
  CHECK(w(5, 3) == doctest::Approx(0.025));
  CHECK(w(19, 9) == 1.0);
}

TEST_CASE("balanced weighting gives every region the same total weight") {
  const OccupancyMap m = maps::corridor_rooms();
  const MapCrop c = crop(m, {60, 60}, 64);
  const TrajectoryWindow w{{{0, 0}, {1.2, 0.1}, {2.5, 0.2}}};
  const TargetMap lit = make_target(c.map, w);
  const TargetMap bal = make_target(c.map, w, LossWeighting::Balanced);
  CHECK(lit.values == bal.values);
  double feasible = 0.0, rest = 0.0, wsum = 0.0;
  std::size_t n_feasible = 0;
  for (std::size_t i = 0; i < bal.values.size(); ++i) {
    wsum += bal.loss_weights.storage()[i];
    if (bal.feasible_mask.storage()[i]) {
      feasible += bal.loss_weights.storage()[i];
      ++n_feasible;
    } else {
      rest += bal.loss_weights.storage()[i];
    }
  }
  REQUIRE(n_feasible > 0);
  CHECK(wsum / static_cast<double>(bal.values.size()) == doctest::Approx(1.0).epsilon(1e-12));
  // components each carry the background's total
  const Grid<double> raw = inverse_area_weights(bal.feasible_mask);
  double components = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i)
    if (bal.feasible_mask.storage()[i]) components += raw.storage()[i];
  CHECK(feasible == doctest::Approx(components * rest).epsilon(1e-9));
}

TEST_CASE("make_target: monotone, bounded, normalized weights") {
  const OccupancyMap m = maps::corridor_rooms();
  const MapCrop c = crop(m, {60, 60}, 64);
  const TargetMap t = make_target(c.map, {{{0, 0}, {1.2, 0.1}, {2.5, 0.2}, {3.4, 1.0}, {4.0, 2.2}}});
  const double lo = 1e-6, hi = 1e-6 * std::exp(14.0);
  double wsum = 0.0;
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    CHECK(t.values.storage()[i] >= lo * (1 - 1e-12));
    CHECK(t.values.storage()[i] <= hi * (1 + 1e-12));
    for (std::size_t j = 0; j < t.values.size(); j += 97)
      if (t.overlap.storage()[i] > t.overlap.storage()[j]) REQUIRE(t.values.storage()[i] >= t.values.storage()[j]);
    wsum += t.loss_weights.storage()[i];
    if (t.feasible_mask.storage()[i]) CHECK(t.overlap.storage()[i] >= 1.0 - kFeasibleEpsilon);
  }
  CHECK(wsum / static_cast<double>(t.values.size()) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("translating map and window translates the target") {
  std::mt19937_64 rng(4);
  OccupancyMap a(30, 30, 0.25, {}, Cell::Occupied);
  OccupancyMap b = a;
  const OccupancyMap inner = testutil::random_map(12, 12, 0.25, rng);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) {
      a.set({5 + x, 5 + y}, inner.at({x, y}));
      b.set({11 + x, 8 + y}, inner.at({x, y}));
    }
  const TrajectoryWindow w{{{0, 0}, {0.5, 0.1}, {0.8, 0.6}}};
  const TargetMap ta = make_target(a, w), tb = make_target(b, w);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x) CHECK(ta.values(x + 2, y + 2) == tb.values(x + 8, y + 5));
}
