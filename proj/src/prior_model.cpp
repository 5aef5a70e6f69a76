#include "mapprior/prior_model.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <random>

#include "mapprior/adam.hpp"
#include "mapprior/io.hpp"
#include "mapprior/kernels.hpp"
#include "mapprior/weights_io.hpp"

namespace mapprior {

void ModelConfig::validate() const {
  if (channels < 1) throw ModelError("model config: channels must be >= 1");
  if (unet_depth < 1) throw ModelError("model config: unet_depth must be >= 1");
  if (base_width < 1) throw ModelError("model config: base_width must be >= 1");
  if (lstm_layers < 1) throw ModelError("model config: lstm_layers must be >= 1");
  if (window_len < 1) throw ModelError("model config: window_len must be >= 1");
  if (crop_size < 1 || crop_size % (1 << unet_depth) != 0)
    throw ModelError("model config: crop_size must be a positive multiple of 2^unet_depth");
  if (!(input_scale > 0) || !std::isfinite(input_scale)) throw ModelError("model config: input_scale must be > 0");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"channels", channels},       {"unet_depth", unet_depth}, {"base_width", base_width},
          {"lstm_layers", lstm_layers}, {"window_len", window_len}, {"crop_size", crop_size},
          {"input_scale", input_scale}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.channels = j.value("channels", c.channels);
  c.unet_depth = j.value("unet_depth", c.unet_depth);
  c.base_width = j.value("base_width", c.base_width);
  c.lstm_layers = j.value("lstm_layers", c.lstm_layers);
  c.window_len = j.value("window_len", c.window_len);
  c.crop_size = j.value("crop_size", c.crop_size);
  c.input_scale = j.value("input_scale", c.input_scale);
  c.validate();
  return c;
}

namespace {

struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  int fan_in;  // 0 for biases
  bool lstm;
};

std::vector<ParamSpec> param_specs(const ModelConfig& c) {
  c.validate();
  std::vector<ParamSpec> specs;
  const auto conv = [&](const std::string& name, int out, int in, int k) {
    specs.push_back({name + ".w", {out, in, k, k}, in * k * k, false});
    specs.push_back({name + ".b", {out}, 0, false});
  };
  int in = 1;
  for (int l = 0; l < c.unet_depth; ++l) {
    conv("enc" + std::to_string(l), c.level_width(l), in, 3);
    in = c.level_width(l);
  }
  conv("bottleneck", in, in, 3);
  for (int l = c.unet_depth - 1; l >= 0; --l) {
    conv("up" + std::to_string(l), c.level_width(l), in, 3);
    conv("dec" + std::to_string(l), c.level_width(l), 2 * c.level_width(l), 3);
    in = c.level_width(l);
  }
  conv("head", c.channels, in, 1);
  int features = 2;
  for (int l = 0; l < c.lstm_layers; ++l) {
    const std::string name = "lstm" + std::to_string(l);
    specs.push_back({name + ".w", {4 * c.channels, features + c.channels}, 0, true});
    specs.push_back({name + ".b", {4 * c.channels}, 0, true});
    features = c.channels;
  }
  return specs;
}

template <typename T>
NodeId conv_block(Graph<T>& g, NodeId x, const std::string& name, int pad, bool relu) {
  const NodeId y = g.conv2d(x, g.param(name + ".w"), g.param(name + ".b"), 1, pad);
  return relu ? g.relu(y) : y;
}

}  // namespace

template <typename T>
ParameterSet<T> make_parameters(const ModelConfig& config) {
  ParameterSet<T> p;
  for (const ParamSpec& s : param_specs(config)) p.add(s.name, Tensor<T>(s.shape));
  return p;
}

ParameterSet<float> init_parameters(const ModelConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParameterSet<float> p;
  for (const ParamSpec& s : param_specs(config)) {
    Tensor<float> t(s.shape);
    double bound = 0.0;
    if (s.lstm)
      bound = 1.0 / std::sqrt(static_cast<double>(config.channels));
    else if (s.fan_in > 0)
      bound = std::sqrt(6.0 / s.fan_in);
    if (bound > 0) {
      std::uniform_real_distribution<double> u(-bound, bound);
      for (float& v : t.data()) v = static_cast<float>(u(rng));
    }
    p.add(s.name, std::move(t));
  }
  return p;
}

template <typename T>
void check_parameters(const ModelConfig& config, const ParameterSet<T>& params) {
  const auto specs = param_specs(config);
  if (specs.size() != params.size())
    throw ModelError("weights hold " + std::to_string(params.size()) + " tensors, config expects " +
                     std::to_string(specs.size()));
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto id = static_cast<ParamId>(i);
    if (params.name(id) != specs[i].name || params.value_shape(id) != specs[i].shape)
      throw ModelError("weights tensor '" + params.name(id) + "' " + shape_string(params.value_shape(id)) +
                       " does not match config ('" + specs[i].name + "' " + shape_string(specs[i].shape) + ")");
  }
}

PriorModel PriorModel::create(const ModelConfig& config, std::uint64_t seed) {
  return {config, init_parameters(config, seed)};
}

PriorModel PriorModel::with_window_len(int len) const {
  PriorModel m = *this;
  m.config.window_len = len;
  m.config.validate();
  return m;
}

void PriorModel::save(const std::filesystem::path& manifest) const { save_weights(manifest, params, config.to_json()); }

PriorModel PriorModel::load(const std::filesystem::path& manifest) {
  WeightsFile f = load_weights(manifest);
  PriorModel m{ModelConfig::from_json(f.config), std::move(f.params)};
  check_parameters(m.config, m.params);
  return m;
}

template <typename T>
NodeId build_map_branch(Graph<T>& g, const ModelConfig& c, NodeId map) {
  const Tensor<T>& in = g.value(map);
  const int unit = 1 << c.unet_depth;
  if (in.rank() != 3 || in.dim(0) != 1 || in.dim(1) % unit != 0 || in.dim(2) % unit != 0)
    throw ShapeError("map branch input must be (1,H,W) with H, W divisible by " + std::to_string(unit) + ", got " +
                     shape_string(in.shape()));
  std::vector<NodeId> skips;
  NodeId x = map;
  for (int l = 0; l < c.unet_depth; ++l) {
    x = conv_block(g, x, "enc" + std::to_string(l), 1, true);
    skips.push_back(x);
    x = g.max_pool2(x);
  }
  x = conv_block(g, x, "bottleneck", 1, true);
  for (int l = c.unet_depth - 1; l >= 0; --l) {
    x = conv_block(g, g.upsample2(x), "up" + std::to_string(l), 1, true);
    x = conv_block(g, g.concat(x, skips[static_cast<std::size_t>(l)]), "dec" + std::to_string(l), 1, true);
  }
  return conv_block(g, x, "head", 0, false);
}

template <typename T>
NodeId build_odometry_branch(Graph<T>& g, const ModelConfig& c, NodeId window) {
  const Tensor<T>& w = g.value(window);
  if (w.rank() != 2 || w.dim(1) != 2) throw ShapeError("odometry branch input must be (L,2)");
  const int steps = w.dim(0);
  const auto hidden = static_cast<std::size_t>(c.channels);
  std::vector<NodeId> seq;
  for (int t = 0; t < steps; ++t) seq.push_back(g.slice(window, static_cast<std::size_t>(2 * t), 2));
  for (int l = 0; l < c.lstm_layers; ++l) {
    const NodeId wl = g.param("lstm" + std::to_string(l) + ".w");
    const NodeId bl = g.param("lstm" + std::to_string(l) + ".b");
    NodeId state = g.input(Tensor<T>({2 * c.channels}));
    for (NodeId& x : seq) {
      state = g.lstm_cell(x, state, wl, bl);
      x = g.slice(state, 0, hidden);
    }
  }
  return seq.back();
}

template <typename T>
Tensor<T> map_to_tensor(const OccupancyMap& map) {
  Tensor<T> t({1, map.height(), map.width()});
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x)
      t[static_cast<std::size_t>(y) * map.width() + x] = map.free(x, y) ? T(1) : T(0);
  return t;
}

template <typename T>
Tensor<T> window_to_tensor(const TrajectoryWindow& window, double resolution, const ModelConfig& config) {
  Tensor<T> t({static_cast<int>(window.size()), 2});
  const double k = config.input_scale / resolution;
  for (std::size_t i = 0; i < window.size(); ++i) {
    t[2 * i] = static_cast<T>(window.positions[i].x * k);
    t[2 * i + 1] = static_cast<T>(window.positions[i].y * k);
  }
  return t;
}

DeepMapTensor encode_map(const OccupancyMap& map, const PriorModel& model) {
  check_parameters(model.config, model.params);
  const int unit = 1 << model.config.unet_depth;
  const int h = map.height(), w = map.width();
  const int ph = (h + unit - 1) / unit * unit, pw = (w + unit - 1) / unit * unit;
  Tensor<float> in({1, ph, pw}, 0.0f);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) in[static_cast<std::size_t>(y) * pw + x] = map.free(x, y) ? 1.0f : 0.0f;
  Graph<float> g(model.params, false);
  const Tensor<float>& out = g.value(build_map_branch(g, model.config, g.input(std::move(in))));
  const int c = out.dim(0);
  DeepMapTensor d{Tensor<float>({c, h, w})};
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      std::copy_n(out.ptr() + (static_cast<std::size_t>(ch) * ph + y) * pw, w,
                  d.features.ptr() + (static_cast<std::size_t>(ch) * h + y) * w);
  return d;
}

std::vector<float> encode_odometry(const TrajectoryWindow& window, double resolution, const PriorModel& model) {
  if (static_cast<int>(window.size()) != model.config.window_len)
    throw ModelError("odometry window has " + std::to_string(window.size()) + " steps, model expects " +
                     std::to_string(model.config.window_len));
  Graph<float> g(model.params, false);
  const NodeId v =
      build_odometry_branch(g, model.config, g.input(window_to_tensor<float>(window, resolution, model.config)));
  const auto data = g.value(v).data();
  return {data.begin(), data.end()};
}

Grid<double> score(const DeepMapTensor& map_tensor, std::span<const float> traj_vector) {
  if (traj_vector.size() != static_cast<std::size_t>(map_tensor.channels()))
    throw ShapeError("score: map tensor has " + std::to_string(map_tensor.channels()) +
                     " channels, trajectory vector has " + std::to_string(traj_vector.size()));
  Grid<double> out(map_tensor.width(), map_tensor.height());
  kernels::score_heatmap(map_tensor.features.data(), map_tensor.channels(), map_tensor.height(), map_tensor.width(),
                         traj_vector, out.storage());
  return out;
}

// --- dataset ------------------------------------------------------------------

std::size_t Dataset::train_samples() const {
  std::size_t n = 0;
  for (const auto& g : train) n += g.samples.size();
  return n;
}

std::size_t Dataset::val_samples() const {
  std::size_t n = 0;
  for (const auto& g : val) n += g.samples.size();
  return n;
}

TrajectoryWindow augment_window(const TrajectoryWindow& truth, const NoiseProfile& noise, double resolution,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const double bias = noise.forced_bias ? *noise.forced_bias : 1.0 + noise.velocity_bias_sigma * unit(rng);
  const double sigma = noise.additive_sigma_cells * resolution;
  TrajectoryWindow out;
  out.positions.reserve(truth.size());
  Vec2 acc;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (i > 0) {
      acc.x += bias * (truth.positions[i].x - truth.positions[i - 1].x) + sigma * unit(rng);
      acc.y += bias * (truth.positions[i].y - truth.positions[i - 1].y) + sigma * unit(rng);
    }
    out.positions.push_back(acc);
  }
  return out;
}

namespace {

struct WindowRef {
  std::size_t traj;
  std::size_t end;
  CellIndex cell;
};

Tensor<float> grid_tensor(const Grid<double>& g) {
  Tensor<float> t({g.height(), g.width()});
  for (std::size_t i = 0; i < g.size(); ++i) t[i] = static_cast<float>(g.storage()[i]);
  return t;
}

}  // namespace

Dataset build_dataset(const OccupancyMap& map, const std::vector<Trajectory>& trajectories, const ModelConfig& model,
                      const DatasetConfig& config, std::uint64_t seed) {
  model.validate();
  const int s = model.crop_size;
  if (s > map.width() || s > map.height()) throw ModelError("crop size exceeds the map");
  if (config.windows_per_crop < 1 || config.groups < 1) throw ModelError("dataset config: counts must be >= 1");
  const auto len = static_cast<std::size_t>(model.window_len);

  std::vector<std::vector<Vec2>> positions(trajectories.size());
  std::vector<WindowRef> train_pool, val_pool;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    for (const Pose& p : trajectories[i].poses) positions[i].push_back({p.x, p.y});
    const std::size_t n = positions[i].size();
    if (n < len) continue;
    const std::size_t windows = n - len + 1;
    const auto n_val = static_cast<std::size_t>(std::ceil(config.val_fraction * static_cast<double>(windows)));
    const std::size_t cut = n - n_val;  // first pose index owned by validation
    for (std::size_t end = len - 1; end < n; ++end) {
      const std::size_t start = end + 1 - len;
      const Pose& p = trajectories[i].poses[end];
      const WindowRef ref{i, end, map.cell_of({p.x, p.y})};
      if (end < cut)
        train_pool.push_back(ref);
      else if (start >= cut)
        val_pool.push_back(ref);
    }
  }
  if (train_pool.empty()) throw ModelError("no training windows: trajectories shorter than the window");

  std::mt19937_64 rng(seed);
  const int n_val_groups =
      val_pool.empty() ? 0 : std::max(1, static_cast<int>(std::lround(config.groups * config.val_fraction)));
  const int n_train_groups = std::max(1, config.groups - n_val_groups);

  const auto make_groups = [&](const std::vector<WindowRef>& pool, int count, std::vector<CropGroup>& out) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::uniform_int_distribution<int> jitter(-s / 4, s / 4 - 1);
    for (int gi = 0; gi < count; ++gi) {
      const WindowRef& anchor = pool[pick(rng)];
      const MapCrop c = crop(map, {anchor.cell.x + jitter(rng), anchor.cell.y + jitter(rng)}, s);
      const auto central = [&](CellIndex cell) {
        const int x = cell.x - c.offset.x, y = cell.y - c.offset.y;
        return x >= s / 4 && x < 3 * s / 4 && y >= s / 4 && y < 3 * s / 4;
      };
      std::vector<const WindowRef*> chosen{&anchor};
      std::vector<const WindowRef*> candidates;
      for (const WindowRef& r : pool)
        if (&r != &anchor && central(r.cell)) candidates.push_back(&r);
      std::shuffle(candidates.begin(), candidates.end(), rng);
      for (const WindowRef* r : candidates) {
        if (static_cast<int>(chosen.size()) >= config.windows_per_crop) break;
        chosen.push_back(r);
      }
      CropGroup group{map_to_tensor<float>(c.map), {}};
      for (const WindowRef* r : chosen) {
        const TrajectoryWindow truth = window_ending_at(positions[r->traj], r->end, len);
        const TargetMap target = make_target(c.map, truth, config.weighting);
        const TrajectoryWindow noisy = augment_window(truth, config.noise, map.resolution(), rng());
        group.samples.push_back({window_to_tensor<float>(noisy, map.resolution(), model), grid_tensor(target.values),
                                 grid_tensor(target.loss_weights)});
      }
      out.push_back(std::move(group));
    }
  };
  Dataset d;
  make_groups(train_pool, n_train_groups, d.train);
  if (n_val_groups > 0) make_groups(val_pool, n_val_groups, d.val);
  return d;
}

// --- training -------------------------------------------------------------------

namespace {

/// Builds the summed sample losses of one group scaled by `scale`. Returns the
/// root and the unscaled per-sample loss sum.
NodeId group_loss(Graph<float>& g, const ModelConfig& config, const CropGroup& group, float scale, double& raw) {
  const NodeId features = build_map_branch(g, config, g.input(group.crop));
  NodeId total = -1;
  raw = 0.0;
  for (const TrainingSample& s : group.samples) {
    const NodeId v = build_odometry_branch(g, config, g.input(s.window));
    const NodeId loss = g.weighted_mse(g.score(features, v), s.target, s.weights);
    raw += g.value(loss).item();
    total = total < 0 ? loss : g.add(total, loss);
  }
  return g.scale(total, scale);
}

}  // namespace

double evaluate_loss(const ModelConfig& config, const ParameterSet<float>& params,
                     const std::vector<CropGroup>& groups) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const CropGroup& group : groups) {
    Graph<float> g(params, false);
    double raw = 0.0;
    group_loss(g, config, group, 1.0f, raw);
    sum += raw;
    n += group.samples.size();
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

TrainResult train(const ModelConfig& config, ParameterSet<float> params, const Dataset& data,
                  const TrainConfig& tc, std::uint64_t seed,
                  const std::function<void(const LossRecord&)>& on_epoch) {
  check_parameters(config, params);
  if (data.train.empty() || data.train_samples() == 0) throw ModelError("training dataset is empty");
  if (tc.batch_size < 1 || tc.epochs < 0) throw ModelError("train config: batch_size >= 1 and epochs >= 0 required");
  if (!(tc.lr > 0) || tc.warmup_steps < 0 || tc.grad_clip < 0) throw ModelError("train config: bad optimizer settings");
  const auto start = std::chrono::steady_clock::now();
  const auto& val_set = data.val.empty() ? data.train : data.val;

  TrainResult result;
  const auto check_finite = [](double v, int epoch) {
    if (!std::isfinite(v))
      throw ModelError("training diverged at epoch " + std::to_string(epoch) + ": non-finite loss");
  };
  LossRecord first{0, evaluate_loss(config, params, data.train), evaluate_loss(config, params, val_set)};
  check_finite(first.train_loss, 0);
  check_finite(first.val_loss, 0);
  result.curve.push_back(first);
  result.best_params = params;
  double best_val = first.val_loss;
  if (on_epoch) on_epoch(first);

  AdamConfig ac;
  ac.lr = tc.lr;
  AdamState<float> adam = AdamState<float>::for_params(params, ac);
  Gradients<float> grads = Gradients<float>::zeros_like(params);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(data.train.size());

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    std::size_t epoch_n = 0;
    std::size_t pos = 0;
    while (pos < order.size()) {
      // Whole groups up to batch_size samples.
      std::size_t end = pos, count = 0;
      while (end < order.size() && (count == 0 || count + data.train[order[end]].samples.size() <=
                                                      static_cast<std::size_t>(tc.batch_size))) {
        count += data.train[order[end]].samples.size();
        ++end;
      }
      grads.zero();
      for (std::size_t k = pos; k < end; ++k) {
        const CropGroup& group = data.train[order[k]];
        if (group.samples.empty()) continue;
        Graph<float> g(params);
        double raw = 0.0;
        const NodeId root = group_loss(g, config, group, 1.0f / static_cast<float>(count), raw);
        check_finite(raw, epoch);
        g.backward(root, grads);
        epoch_sum += raw;
      }
      epoch_n += count;
      if (tc.grad_clip > 0) {
        double norm2 = 0.0;
        for (const auto& t : grads.tensors)
          for (float v : t.data()) norm2 += static_cast<double>(v) * v;
        const double norm = std::sqrt(norm2);
        if (norm > tc.grad_clip) grads.scale(static_cast<float>(tc.grad_clip / norm));
      }
      if (tc.warmup_steps > 0)
        adam.config.lr = tc.lr * std::min(1.0, static_cast<double>(adam.step + 1) / tc.warmup_steps);
      adam_step(params, grads, adam);
      pos = end;
    }
    LossRecord rec{epoch, epoch_sum / static_cast<double>(epoch_n), evaluate_loss(config, params, val_set)};
    check_finite(rec.val_loss, epoch);
    result.curve.push_back(rec);
    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      result.best_params = params;
      result.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(rec);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (tc.time_budget_s > 0 && elapsed >= tc.time_budget_s) break;
  }
  return result;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& curve) {
  std::string out = "epoch,train_loss,val_loss\n";
  char buf[64];
  for (const LossRecord& r : curve) {
    out += std::to_string(r.epoch);
    for (double v : {r.train_loss, r.val_loss}) {
      out += ',';
      out.append(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

template ParameterSet<float> make_parameters<float>(const ModelConfig&);
template ParameterSet<double> make_parameters<double>(const ModelConfig&);
template void check_parameters<float>(const ModelConfig&, const ParameterSet<float>&);
template void check_parameters<double>(const ModelConfig&, const ParameterSet<double>&);
template NodeId build_map_branch<float>(Graph<float>&, const ModelConfig&, NodeId);
template NodeId build_map_branch<double>(Graph<double>&, const ModelConfig&, NodeId);
template NodeId build_odometry_branch<float>(Graph<float>&, const ModelConfig&, NodeId);
template NodeId build_odometry_branch<double>(Graph<double>&, const ModelConfig&, NodeId);
template Tensor<float> map_to_tensor<float>(const OccupancyMap&);
template Tensor<double> map_to_tensor<double>(const OccupancyMap&);
template Tensor<float> window_to_tensor<float>(const TrajectoryWindow&, double, const ModelConfig&);
template Tensor<double> window_to_tensor<double>(const TrajectoryWindow&, double, const ModelConfig&);

}  // namespace mapprior
