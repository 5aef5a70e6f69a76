#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "mapprior/maps.hpp"
#include "mapprior/metrics.hpp"
#include "mapprior/particle_filter.hpp"
#include "mapprior/prior_model.hpp"
#include "mapprior/weights_io.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mapprior;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.channels = 4;
  c.base_width = 2;
  c.unet_depth = 2;
  c.window_len = 3;
  c.crop_size = 8;
  return c;
}

TrajectoryWindow random_window(std::size_t len, std::mt19937_64& rng) {
  std::normal_distribution<double> step(0.0, 0.8);
  TrajectoryWindow w{{{0, 0}}};
  while (w.size() < len) w.positions.push_back({w.positions.back().x + step(rng), w.positions.back().y + step(rng)});
  return w;
}

// 16 x 16 m box, fully occupied except a 2.5 m east-west corridor.
OccupancyMap corridor_box() {
  OccupancyMap m(64, 64, 0.25, {}, Cell::Occupied);
  m.fill_rect(2, 27, 61, 36, Cell::Free);
  return m;
}

}  // namespace

TEST_CASE("encode_map keeps the spatial size") {
  const PriorModel model = PriorModel::create(ModelConfig{}, 1);
  for (auto [w, h] : {std::pair{8, 8}, std::pair{20, 13}, std::pair{33, 9}}) {
    const OccupancyMap m(w, h, 0.25);
    const DeepMapTensor t = encode_map(m, model);
    CHECK(t.channels() == 32);
    CHECK(t.width() == w);
    CHECK(t.height() == h);
  }
}

TEST_CASE("zero weights: map branch outputs the head bias, odometry branch outputs zero") {
  PriorModel model{ModelConfig{}, make_parameters<float>(ModelConfig{})};
  const ParamId hb = model.params.find("head.b");
  REQUIRE(hb >= 0);
  for (int c = 0; c < 32; ++c) model.params.data(hb)[static_cast<std::size_t>(c)] = 0.1f * static_cast<float>(c);
  std::mt19937_64 rng(2);
  const DeepMapTensor t = encode_map(testutil::random_map(24, 16, 0.4, rng), model);
  for (int c = 0; c < 32; ++c)
    for (int i = 0; i < 24 * 16; ++i) REQUIRE(t.features[static_cast<std::size_t>(c * 24 * 16 + i)] == 0.1f * c);
  const auto v = encode_odometry(random_window(5, rng), 0.25, model);
  CHECK(v.size() == 32);
  for (float x : v) CHECK(x == 0.0f);
}

TEST_CASE("encoding is deterministic and cacheable") {
  const PriorModel model = PriorModel::create(ModelConfig{}, 3);
  const OccupancyMap m = maps::hallway_with_side_rooms();
  const DeepMapTensor a = encode_map(m, model), b = encode_map(m, model);
  CHECK(a.features == b.features);
  std::mt19937_64 rng(4);
  const TrajectoryWindow w = random_window(5, rng);
  const TrajectoryWindow w2 = w;
  const auto v = encode_odometry(w, 0.25, model);
  CHECK(v == encode_odometry(w2, 0.25, model));
  CHECK(v.size() == 32);
  CHECK(score(a, v) == score(b, v));
  CHECK_THROWS_AS(encode_odometry(random_window(4, rng), 0.25, model), ModelError);
}

TEST_CASE("score is bilinear and projects onto channels") {
  std::mt19937_64 rng(5);
  DeepMapTensor f{oracle::random_tensor({4, 3, 5}, rng).cast<float>()};
  DeepMapTensor f2{oracle::random_tensor({4, 3, 5}, rng).cast<float>()};
  const std::vector<float> zero(4, 0.0f);
  const Grid<double> s0 = score(f, zero);
  for (double v : s0.storage()) CHECK(v == 0.0);
  for (int k = 0; k < 4; ++k) {
    std::vector<float> e(4, 0.0f);
    e[static_cast<std::size_t>(k)] = 1.0f;
    const Grid<double> s = score(f, e);
    for (int i = 0; i < 15; ++i) CHECK(s.storage()[static_cast<std::size_t>(i)] == f.features[static_cast<std::size_t>(k * 15 + i)]);
  }
  const std::vector<float> a{0.5f, -1.0f, 2.0f, 0.25f}, b{1.5f, 0.5f, -0.75f, 1.0f};
  std::vector<float> ab(4), a3(4);
  for (int i = 0; i < 4; ++i) {
    ab[i] = a[i] + b[i];
    a3[i] = 3.0f * a[i];
  }
  DeepMapTensor fsum{f.features};
  for (std::size_t i = 0; i < fsum.features.size(); ++i) fsum.features[i] += f2.features[i];
  const Grid<double> sa = score(f, a), sb = score(f, b), sab = score(f, ab), s3 = score(f, a3), sf2 = score(f2, a),
                     sfsum = score(fsum, a);
  for (std::size_t i = 0; i < sa.size(); ++i) {
    CHECK(sab.storage()[i] == doctest::Approx(sa.storage()[i] + sb.storage()[i]).epsilon(1e-5));
    CHECK(s3.storage()[i] == doctest::Approx(3.0 * sa.storage()[i]).epsilon(1e-5));
    CHECK(sfsum.storage()[i] == doctest::Approx(sa.storage()[i] + sf2.storage()[i]).epsilon(1e-5));
  }
  CHECK_THROWS_AS(score(f, std::vector<float>(3)), ShapeError);
}

TEST_CASE("end-to-end gradient check on an 8x8 crop with a length-3 window") {
  std::mt19937_64 rng(6);
  const OccupancyMap m = testutil::random_map(8, 8, 0.3, rng);
  const TrajectoryWindow w{{{0, 0}, {0.3, 0.2}, {0.6, 0.3}}};
  const TargetMap target = make_target(m, w);
  Tensor<double> t({8, 8}), wt({8, 8});
  for (std::size_t i = 0; i < 64; ++i) {
    t[i] = target.values.storage()[i];
    wt[i] = target.loss_weights.storage()[i];
  }
  const auto build = [&](const ModelConfig& c) {
    return [&, c](Graph<double>& g, const std::vector<NodeId>& in) {
      const NodeId f = build_map_branch(g, c, in[0]);
      const NodeId v = build_odometry_branch(g, c, in[1]);
      return g.weighted_mse(g.score(f, v), t, wt);
    };
  };
  SUBCASE("small config, every entry") {
    const ModelConfig c = small_config();
    ParameterSet<double> p = init_parameters(c, 7).cast<double>();
    const double e = oracle::gradient_error(
        p, {map_to_tensor<double>(m), window_to_tensor<double>(w, 0.25, c)}, build(c));
    CHECK(e < 1e-4);
  }
  SUBCASE("default config, sampled entries") {
    ModelConfig c;
    c.window_len = 3;
    ParameterSet<double> p = init_parameters(c, 8).cast<double>();
    const double e = oracle::gradient_error(p, {map_to_tensor<double>(m), window_to_tensor<double>(w, 0.25, c)},
                                            build(c), 1e-5, 6);
    CHECK(e < 1e-4);
  }
}

TEST_CASE("weights round-trip bit-exactly and reject damage") {
  const auto dir = testutil::temp_dir("weights");
  const PriorModel model = PriorModel::create(ModelConfig{}, 9);
  model.save(dir / "m.json");
  const PriorModel back = PriorModel::load(dir / "m.json");
  CHECK(back.params == model.params);
  CHECK(back.config.to_json() == model.config.to_json());

  std::filesystem::resize_file(weights_blob_path(dir / "m.json"), 100);
  CHECK_THROWS_AS(PriorModel::load(dir / "m.json"), WeightsError);
  CHECK_THROWS(PriorModel::load(dir / "missing.json"));

  ModelConfig other;
  other.channels = 16;
  PriorModel small{other, init_parameters(other, 1)};
  small.save(dir / "s.json");
  WeightsFile f = load_weights(dir / "s.json");
  CHECK_THROWS_AS(check_parameters(ModelConfig{}, f.params), ModelError);
}

TEST_CASE("dataset groups share crops and keep windows in the crop centre") {
  const OccupancyMap m = maps::corridor_rooms();
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 3; ++i) trajs.push_back(generate_trajectory(m, 100 + i, 300.0, MotionProfile::Pedestrian));
  DatasetConfig dc;
  dc.groups = 20;
  const Dataset d = build_dataset(m, trajs, ModelConfig{}, dc, 1);
  CHECK(d.train.size() == 18);
  CHECK(d.val.size() == 2);
  for (const CropGroup& g : d.train) {
    CHECK(g.crop.shape() == std::vector<int>{1, 64, 64});
    CHECK(!g.samples.empty());
    CHECK(g.samples.size() <= 8);
    for (const TrainingSample& s : g.samples) {
      CHECK(s.window.shape() == std::vector<int>{5, 2});
      CHECK(s.target.shape() == std::vector<int>{64, 64});
    }
  }
  const Dataset again = build_dataset(m, trajs, ModelConfig{}, dc, 1);
  CHECK(again.train[3].samples[2].window == d.train[3].samples[2].window);
}

TEST_CASE("augment_window with forced bias and no noise scales the window") {
  NoiseProfile n = NoiseProfile::none();
  n.forced_bias = 2.0;
  const TrajectoryWindow w{{{0, 0}, {1, 0.5}, {1.5, 2}}};
  const TrajectoryWindow a = augment_window(w, n, 0.25, 1);
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(a.positions[i].x == doctest::Approx(2 * w.positions[i].x));
    CHECK(a.positions[i].y == doctest::Approx(2 * w.positions[i].y));
  }
}

TEST_CASE("training overfits a 10-sample toy set" * doctest::test_suite("slow")) {
  ModelConfig c;
  c.crop_size = 32;
  std::mt19937_64 rng(10);
  const OccupancyMap m = testutil::random_map(32, 32, 0.25, rng);
  Dataset d;
  for (int gi = 0; gi < 2; ++gi) {
    CropGroup g{map_to_tensor<float>(m), {}};
    for (int i = 0; i < 5; ++i) {
      const TrajectoryWindow w = random_window(5, rng);
      const TargetMap t = make_target(m, w);
      Tensor<float> tt({32, 32}), tw({32, 32});
      for (std::size_t k = 0; k < t.values.size(); ++k) {
        tt[k] = static_cast<float>(t.values.storage()[k]);
        tw[k] = static_cast<float>(t.loss_weights.storage()[k]);
      }
      g.samples.push_back({window_to_tensor<float>(w, 0.25, c), tt, tw});
    }
    d.train.push_back(std::move(g));
  }
  TrainConfig tc;
  tc.epochs = 200;
  tc.batch_size = 10;
  const TrainResult r = train(c, init_parameters(c, 11), d, tc, 12);
  double best = r.curve.front().train_loss;
  for (const LossRecord& l : r.curve) best = std::min(best, l.train_loss);
  CHECK(best <= 0.5 * r.curve.front().train_loss);
}

TEST_CASE("training is deterministic") {
  ModelConfig c = small_config();
  c.crop_size = 16;
  std::mt19937_64 rng(13);
  const OccupancyMap m = testutil::random_map(16, 16, 0.2, rng);
  Dataset d;
  CropGroup g{map_to_tensor<float>(m), {}};
  for (int i = 0; i < 4; ++i) {
    const TrajectoryWindow w = random_window(3, rng);
    const TargetMap t = make_target(m, w);
    Tensor<float> tt({16, 16}), tw({16, 16});
    for (std::size_t k = 0; k < t.values.size(); ++k) {
      tt[k] = static_cast<float>(t.values.storage()[k]);
      tw[k] = static_cast<float>(t.loss_weights.storage()[k]);
    }
    g.samples.push_back({window_to_tensor<float>(w, 0.25, c), tt, tw});
  }
  d.train.push_back(g);
  d.train.push_back(g);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 4;
  const TrainResult a = train(c, init_parameters(c, 1), d, tc, 2);
  const TrainResult b = train(c, init_parameters(c, 1), d, tc, 2);
  CHECK(a.best_params == b.best_params);
  CHECK(a.curve.size() == 4);
  CHECK_THROWS_AS(train(c, init_parameters(c, 1), Dataset{}, tc, 2), ModelError);
}

TEST_CASE("corridor model: argmax in the feasible region, beats untrained, beats odometry" * doctest::test_suite("slow")) {
  const OccupancyMap m = corridor_box();
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 6; ++i) trajs.push_back(generate_trajectory(m, 200 + i, 400.0, MotionProfile::Pedestrian));
  DatasetConfig dc;
  dc.groups = 120;
  const ModelConfig mc;
  const Dataset d = build_dataset(m, trajs, mc, dc, 1);
  TrainConfig tc;
  tc.epochs = 12;
  const TrainResult r = train(mc, init_parameters(mc, 2), d, tc, 3);
  const PriorModel model{mc, r.best_params};
  CHECK(r.curve[static_cast<std::size_t>(r.best_epoch)].val_loss < r.curve.front().val_loss);

  const DeepMapTensor tensor = encode_map(m, model);
  const TrajectoryWindow w{{{0, 0}, {1.3, 0}, {2.6, 0}, {3.9, 0}, {5.2, 0}}};
  const Grid<double> s = score(tensor, encode_odometry(w, m.resolution(), model));
  const TargetMap truth = make_target(m, w);
  const auto best = std::max_element(s.storage().begin(), s.storage().end()) - s.storage().begin();
  CHECK(truth.feasible_mask.storage()[static_cast<std::size_t>(best)] == 1);

  int wins = 0;
  for (int seed = 0; seed < 10; ++seed) {
    const Trajectory gt = generate_trajectory(m, 300 + seed, 120.0, MotionProfile::Pedestrian);
    const OdometryStream odom = corrupt_to_odometry(gt, NoiseProfile::pedestrian(), m.resolution(), 400 + seed);
    PriorSource src;
    src.kind = PriorKind::Learned;
    src.model = &model;
    src.map_tensor = &tensor;
    const FilterResult fr =
        run_filter(odom, m, src, gt.poses[0], FilterConfig::for_profile(MotionProfile::Pedestrian), 500 + seed);
    if (ate(fr.estimate, gt) < ate(integrate_odometry(odom, gt.poses[0]), gt)) ++wins;
  }
  CHECK(wins >= 9);
}
