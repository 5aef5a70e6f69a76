#pragma once

// Hot inner loops. `kernels::` holds the OpenMP/GEMM versions used by the
// library; `reference::` holds plain serial loops that the tests and the
// benchmark compare against.

#include <span>
#include <vector>

#include "mapprior/grid.hpp"
#include "mapprior/occupancy_map.hpp"

namespace mapprior {

struct TrajectoryKernel;

/// 2D convolution geometry (cross-correlation, square kernel, symmetric
/// zero padding). Tensors are CHW, weights OCkk.
struct ConvShape {
  int in_channels = 1;
  int height = 1;
  int width = 1;
  int out_channels = 1;
  int kernel = 1;
  int stride = 1;
  int pad = 0;

  int out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  int out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
  std::size_t input_size() const { return static_cast<std::size_t>(in_channels) * height * width; }
  std::size_t output_size() const { return static_cast<std::size_t>(out_channels) * out_height() * out_width(); }
  std::size_t weight_size() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel;
  }
  /// Throws std::invalid_argument on nonpositive sizes or an empty output.
  void validate() const;
};

namespace kernels {

template <typename T>
void conv2d_forward(const ConvShape& s, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output, std::vector<T>& scratch);

/// Accumulates into grad_input (if nonempty), grad_weight and grad_bias.
template <typename T>
void conv2d_backward(const ConvShape& s, std::span<const T> input, std::span<const T> weight,
                     std::span<const T> grad_output, std::span<T> grad_input, std::span<T> grad_weight,
                     std::span<T> grad_bias, std::vector<T>& scratch);

/// out(h, w) = sum_c features(c, h, w) * vec(c).
void score_heatmap(std::span<const float> features, int channels, int height, int width,
                   std::span<const float> vec, std::span<double> out);

void cross_correlate(const OccupancyMap& map, const TrajectoryKernel& kernel, Grid<double>& out);

}  // namespace kernels

namespace reference {

template <typename T>
void conv2d_forward(const ConvShape& s, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output);

template <typename T>
void conv2d_backward(const ConvShape& s, std::span<const T> input, std::span<const T> weight,
                     std::span<const T> grad_output, std::span<T> grad_input, std::span<T> grad_weight,
                     std::span<T> grad_bias);

void score_heatmap(std::span<const float> features, int channels, int height, int width,
                   std::span<const float> vec, std::span<double> out);

void cross_correlate(const OccupancyMap& map, const TrajectoryKernel& kernel, Grid<double>& out);

}  // namespace reference

}  // namespace mapprior
