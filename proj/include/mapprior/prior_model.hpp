#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "mapprior/graph.hpp"
#include "mapprior/grid.hpp"
#include "mapprior/occupancy_map.hpp"
#include "mapprior/target.hpp"
#include "mapprior/tensor.hpp"
#include "mapprior/trajectory.hpp"

namespace mapprior {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  int channels = 32;     // c
  int unet_depth = 3;    // pooling levels
  int base_width = 16;   // width of the first level, doubled per level
  int lstm_layers = 2;
  int window_len = 5;    // odometry steps per window
  int crop_size = 64;    // training crop side, cells
  double input_scale = 0.1;  // LSTM inputs are positions in cells times this

  /// Throws ModelError when a field is out of range.
  void validate() const;
  int level_width(int level) const { return base_width << level; }

  nlohmann::json to_json() const;
  /// Missing keys keep their defaults.
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Parameter names and shapes for a configuration, zero-initialized.
template <typename T>
ParameterSet<T> make_parameters(const ModelConfig& config);

/// Kaiming-uniform convolutions, uniform +-1/sqrt(hidden) LSTM, zero biases.
ParameterSet<float> init_parameters(const ModelConfig& config, std::uint64_t seed);

/// Throws ModelError unless `params` has exactly the names and shapes of
/// make_parameters(config).
template <typename T>
void check_parameters(const ModelConfig& config, const ParameterSet<T>& params);

struct PriorModel {
  ModelConfig config;
  ParameterSet<float> params;

  static PriorModel create(const ModelConfig& config, std::uint64_t seed);
  /// Same weights with a different window length (the LSTM is length agnostic).
  PriorModel with_window_len(int len) const;

  void save(const std::filesystem::path& manifest) const;
  static PriorModel load(const std::filesystem::path& manifest);
};

// Graph construction, shared by inference, training and gradient checks.

/// (1,H,W) input, H and W divisible by 2^depth. Returns the (c,H,W) node.
template <typename T>
NodeId build_map_branch(Graph<T>& g, const ModelConfig& config, NodeId map);

/// (L,2) input. Returns the (c) last hidden state of the top layer.
template <typename T>
NodeId build_odometry_branch(Graph<T>& g, const ModelConfig& config, NodeId window);

/// Free = 1, occupied = 0, as a (1,H,W) tensor.
template <typename T>
Tensor<T> map_to_tensor(const OccupancyMap& map);

/// (L,2) LSTM input: positions converted to cells and scaled.
template <typename T>
Tensor<T> window_to_tensor(const TrajectoryWindow& window, double resolution, const ModelConfig& config);

/// Cached output of the map branch: (c,H,W) aligned with the map cells.
struct DeepMapTensor {
  Tensor<float> features;

  int channels() const { return features.dim(0); }
  int height() const { return features.dim(1); }
  int width() const { return features.dim(2); }
};

/// Runs the map branch once. Maps whose sides are not multiples of 2^depth
/// are padded with occupied cells and the output cropped back.
DeepMapTensor encode_map(const OccupancyMap& map, const PriorModel& model);

/// Deep Trajectory Vector. Throws ModelError when the window length differs
/// from config.window_len.
std::vector<float> encode_odometry(const TrajectoryWindow& window, double resolution, const PriorModel& model);

/// S(x) = f(M)_x . g(O) for every cell. Throws ShapeError on a channel mismatch.
Grid<double> score(const DeepMapTensor& map_tensor, std::span<const float> traj_vector);

// --- training ---------------------------------------------------------------

/// One supervised window: noisy odometry input and its target on a crop.
struct TrainingSample {
  Tensor<float> window;   // (L,2)
  Tensor<float> target;   // (S,S)
  Tensor<float> weights;  // (S,S)
};

/// Several windows sharing one crop, so the map branch runs once for all.
struct CropGroup {
  Tensor<float> crop;  // (1,S,S)
  std::vector<TrainingSample> samples;
};

struct Dataset {
  std::vector<CropGroup> train;
  std::vector<CropGroup> val;

  std::size_t train_samples() const;
  std::size_t val_samples() const;
};

struct DatasetConfig {
  int windows_per_crop = 8;
  int groups = 256;             // crop groups drawn in total (train + val)
  double val_fraction = 0.1;    // tail of each trajectory, by time
  LossWeighting weighting = LossWeighting::Balanced;
  NoiseProfile noise = NoiseProfile::pedestrian();
};

/// Windows ground-truth trajectories, perturbs each window with a fresh
/// multiplicative bias and additive noise, and builds crop-centred targets
/// whose window ends lie in the central half of the crop.
Dataset build_dataset(const OccupancyMap& map, const std::vector<Trajectory>& trajectories,
                      const ModelConfig& model, const DatasetConfig& config, std::uint64_t seed);

/// Adds bias ~ N(1, velocity_bias_sigma) to every displacement of a window and
/// N(0, additive_sigma_cells * resolution) per axis per step.
TrajectoryWindow augment_window(const TrajectoryWindow& truth, const NoiseProfile& noise, double resolution,
                                std::uint64_t seed);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  double lr = 0.01;
  int warmup_steps = 200;   // linear learning-rate ramp over the first updates
  double grad_clip = 0.0;   // global gradient-norm limit; 0 = none
  double time_budget_s = 0.0;  // stop after the epoch that crosses it; 0 = none
};

struct LossRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  ParameterSet<float> best_params;
  std::vector<LossRecord> curve;  // epoch 0 is the untrained model
  int best_epoch = 0;
};

/// Mean weighted MSE over a set of groups with the given parameters.
double evaluate_loss(const ModelConfig& config, const ParameterSet<float>& params,
                     const std::vector<CropGroup>& groups);

/// Adam on the batch-mean weighted MSE. Batches are whole crop groups whose
/// sample counts add up to batch_size. Returns the parameters with the lowest
/// validation loss. Throws ModelError on an empty dataset or non-finite loss.
TrainResult train(const ModelConfig& config, ParameterSet<float> params, const Dataset& data,
                  const TrainConfig& train_config, std::uint64_t seed,
                  const std::function<void(const LossRecord&)>& on_epoch = {});

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& curve);

}  // namespace mapprior
