#include "mapprior/kernels.hpp"

#include <algorithm>
#include <stdexcept>

#include <Eigen/Core>

#include "mapprior/target.hpp"

namespace mapprior {

void ConvShape::validate() const {
  if (in_channels < 1 || height < 1 || width < 1 || out_channels < 1 || kernel < 1 || stride < 1 || pad < 0)
    throw std::invalid_argument("conv2d: nonpositive dimension");
  if (height + 2 * pad < kernel || width + 2 * pad < kernel)
    throw std::invalid_argument("conv2d: kernel larger than padded input");
}

namespace {

void check_sizes(const ConvShape& s, std::size_t input, std::size_t weight, std::size_t bias, std::size_t output) {
  s.validate();
  if (input != s.input_size() || weight != s.weight_size() || bias != static_cast<std::size_t>(s.out_channels) ||
      output != s.output_size())
    throw std::invalid_argument("conv2d: tensor size does not match shape");
}

bool is_pointwise(const ConvShape& s) { return s.kernel == 1 && s.stride == 1 && s.pad == 0; }

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
void im2col(const ConvShape& s, const T* input, T* col) {
  const int ho = s.out_height(), wo = s.out_width(), k = s.kernel;
  const std::size_t n = static_cast<std::size_t>(ho) * wo;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < s.in_channels; ++c) {
    const T* plane = input + static_cast<std::size_t>(c) * s.height * s.width;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        T* row = col + (static_cast<std::size_t>(c) * k * k + ki * k + kj) * n;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * s.stride - s.pad + ki;
          T* dst = row + static_cast<std::size_t>(oh) * wo;
          if (ih < 0 || ih >= s.height) {
            std::fill(dst, dst + wo, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(ih) * s.width;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * s.stride - s.pad + kj;
            dst[ow] = (iw >= 0 && iw < s.width) ? src[iw] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvShape& s, const T* col, T* grad_input) {
  const int ho = s.out_height(), wo = s.out_width(), k = s.kernel;
  const std::size_t n = static_cast<std::size_t>(ho) * wo;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < s.in_channels; ++c) {
    T* plane = grad_input + static_cast<std::size_t>(c) * s.height * s.width;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const T* row = col + (static_cast<std::size_t>(c) * k * k + ki * k + kj) * n;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * s.stride - s.pad + ki;
          if (ih < 0 || ih >= s.height) continue;
          T* dst = plane + static_cast<std::size_t>(ih) * s.width;
          const T* src = row + static_cast<std::size_t>(oh) * wo;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * s.stride - s.pad + kj;
            if (iw >= 0 && iw < s.width) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace

namespace kernels {

template <typename T>
void conv2d_forward(const ConvShape& s, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output, std::vector<T>& scratch) {
  check_sizes(s, input.size(), weight.size(), bias.size(), output.size());
  const Eigen::Index rows = static_cast<Eigen::Index>(s.in_channels) * s.kernel * s.kernel;
  const Eigen::Index n = static_cast<Eigen::Index>(s.out_height()) * s.out_width();
  const T* col = input.data();
  if (!is_pointwise(s)) {
    scratch.resize(static_cast<std::size_t>(rows * n));
    im2col(s, input.data(), scratch.data());
    col = scratch.data();
  }
  Eigen::Map<const RowMat<T>> w(weight.data(), s.out_channels, rows);
  Eigen::Map<const RowMat<T>> x(col, rows, n);
  Eigen::Map<RowMat<T>> y(output.data(), s.out_channels, n);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias.data(), s.out_channels);
  y.noalias() = w * x;
  y.colwise() += b;
}

template <typename T>
void conv2d_backward(const ConvShape& s, std::span<const T> input, std::span<const T> weight,
                     std::span<const T> grad_output, std::span<T> grad_input, std::span<T> grad_weight,
                     std::span<T> grad_bias, std::vector<T>& scratch) {
  check_sizes(s, input.size(), weight.size(), grad_bias.size(), grad_output.size());
  if (grad_weight.size() != weight.size()) throw std::invalid_argument("conv2d: grad_weight size mismatch");
  if (!grad_input.empty() && grad_input.size() != input.size())
    throw std::invalid_argument("conv2d: grad_input size mismatch");
  const Eigen::Index rows = static_cast<Eigen::Index>(s.in_channels) * s.kernel * s.kernel;
  const Eigen::Index n = static_cast<Eigen::Index>(s.out_height()) * s.out_width();
  Eigen::Map<const RowMat<T>> w(weight.data(), s.out_channels, rows);
  Eigen::Map<const RowMat<T>> dy(grad_output.data(), s.out_channels, n);
  Eigen::Map<RowMat<T>> dw(grad_weight.data(), s.out_channels, rows);
  // Fixed summation order; Eigen's vectorized redux depends on alignment.
  for (int o = 0; o < s.out_channels; ++o) {
    const T* row = grad_output.data() + static_cast<std::size_t>(o) * n;
    T acc = T(0);
    for (Eigen::Index i = 0; i < n; ++i) acc += row[i];
    grad_bias[static_cast<std::size_t>(o)] += acc;
  }

  if (is_pointwise(s)) {
    Eigen::Map<const RowMat<T>> x(input.data(), rows, n);
    dw.noalias() += dy * x.transpose();
    if (!grad_input.empty()) {
      Eigen::Map<RowMat<T>> dx(grad_input.data(), rows, n);
      dx.noalias() += w.transpose() * dy;
    }
    return;
  }
  scratch.resize(static_cast<std::size_t>(rows * n));
  im2col(s, input.data(), scratch.data());
  {
    Eigen::Map<const RowMat<T>> x(scratch.data(), rows, n);
    dw.noalias() += dy * x.transpose();
  }
  if (!grad_input.empty()) {
    Eigen::Map<RowMat<T>> dcol(scratch.data(), rows, n);
    dcol.noalias() = w.transpose() * dy;
    col2im_add(s, scratch.data(), grad_input.data());
  }
}

void score_heatmap(std::span<const float> features, int channels, int height, int width,
                   std::span<const float> vec, std::span<double> out) {
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  if (features.size() != hw * channels || vec.size() != static_cast<std::size_t>(channels) || out.size() != hw)
    throw std::invalid_argument("score_heatmap: channel or size mismatch");
  constexpr std::size_t block = 1024;
  const std::size_t blocks = (hw + block - 1) / block;
#pragma omp parallel for schedule(static)
  for (std::size_t bi = 0; bi < blocks; ++bi) {
    const std::size_t begin = bi * block, end = std::min(hw, begin + block);
    float acc[block] = {};
    for (int c = 0; c < channels; ++c) {
      const float* f = features.data() + static_cast<std::size_t>(c) * hw;
      const float v = vec[c];
      for (std::size_t i = begin; i < end; ++i) acc[i - begin] += f[i] * v;
    }
    for (std::size_t i = begin; i < end; ++i) out[i] = acc[i - begin];
  }
}

void cross_correlate(const OccupancyMap& map, const TrajectoryKernel& kernel, Grid<double>& out) {
  struct Tap {
    int dx, dy;
    double w;
  };
  std::vector<Tap> taps;
  for (int ky = 0; ky < kernel.height(); ++ky)
    for (int kx = 0; kx < kernel.width(); ++kx)
      if (kernel.weights(kx, ky) != 0.0)
        taps.push_back({kx - kernel.anchor.x, ky - kernel.anchor.y, kernel.weights(kx, ky)});

  const int w = map.width(), h = map.height();
  // Free mask with a border wide enough that no tap leaves it.
  int margin = 0;
  for (const Tap& t : taps) margin = std::max({margin, std::abs(t.dx), std::abs(t.dy)});
  const int pw = w + 2 * margin;
  std::vector<unsigned char> free_mask(static_cast<std::size_t>(pw) * (h + 2 * margin), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      free_mask[static_cast<std::size_t>(y + margin) * pw + x + margin] = map.free(x, y) ? 1 : 0;

  out = Grid<double>(w, h, 0.0);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (const Tap& t : taps)
        if (free_mask[static_cast<std::size_t>(y + t.dy + margin) * pw + (x + t.dx + margin)]) acc += t.w;
      out(x, y) = acc;
    }
  }
}

template void conv2d_forward<float>(const ConvShape&, std::span<const float>, std::span<const float>,
                                    std::span<const float>, std::span<float>, std::vector<float>&);
template void conv2d_forward<double>(const ConvShape&, std::span<const double>, std::span<const double>,
                                     std::span<const double>, std::span<double>, std::vector<double>&);
template void conv2d_backward<float>(const ConvShape&, std::span<const float>, std::span<const float>,
                                     std::span<const float>, std::span<float>, std::span<float>,
                                     std::span<float>, std::vector<float>&);
template void conv2d_backward<double>(const ConvShape&, std::span<const double>, std::span<const double>,
                                      std::span<const double>, std::span<double>, std::span<double>,
                                      std::span<double>, std::vector<double>&);

}  // namespace kernels

namespace reference {

template <typename T>
void conv2d_forward(const ConvShape& s, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output) {
  check_sizes(s, input.size(), weight.size(), bias.size(), output.size());
  const int ho = s.out_height(), wo = s.out_width(), k = s.kernel;
  for (int o = 0; o < s.out_channels; ++o)
    for (int oh = 0; oh < ho; ++oh)
      for (int ow = 0; ow < wo; ++ow) {
        T acc = bias[o];
        for (int c = 0; c < s.in_channels; ++c)
          for (int ki = 0; ki < k; ++ki)
            for (int kj = 0; kj < k; ++kj) {
              const int ih = oh * s.stride - s.pad + ki, iw = ow * s.stride - s.pad + kj;
              if (ih < 0 || ih >= s.height || iw < 0 || iw >= s.width) continue;
              acc += weight[((static_cast<std::size_t>(o) * s.in_channels + c) * k + ki) * k + kj] *
                     input[(static_cast<std::size_t>(c) * s.height + ih) * s.width + iw];
            }
        output[(static_cast<std::size_t>(o) * ho + oh) * wo + ow] = acc;
      }
}

template <typename T>
void conv2d_backward(const ConvShape& s, std::span<const T> input, std::span<const T> weight,
                     std::span<const T> grad_output, std::span<T> grad_input, std::span<T> grad_weight,
                     std::span<T> grad_bias) {
  check_sizes(s, input.size(), weight.size(), grad_bias.size(), grad_output.size());
  const int ho = s.out_height(), wo = s.out_width(), k = s.kernel;
  for (int o = 0; o < s.out_channels; ++o)
    for (int oh = 0; oh < ho; ++oh)
      for (int ow = 0; ow < wo; ++ow) {
        const T g = grad_output[(static_cast<std::size_t>(o) * ho + oh) * wo + ow];
        grad_bias[o] += g;
        for (int c = 0; c < s.in_channels; ++c)
          for (int ki = 0; ki < k; ++ki)
            for (int kj = 0; kj < k; ++kj) {
              const int ih = oh * s.stride - s.pad + ki, iw = ow * s.stride - s.pad + kj;
              if (ih < 0 || ih >= s.height || iw < 0 || iw >= s.width) continue;
              const std::size_t wi = ((static_cast<std::size_t>(o) * s.in_channels + c) * k + ki) * k + kj;
              const std::size_t ii = (static_cast<std::size_t>(c) * s.height + ih) * s.width + iw;
              grad_weight[wi] += g * input[ii];
              if (!grad_input.empty()) grad_input[ii] += g * weight[wi];
            }
      }
}

void score_heatmap(std::span<const float> features, int channels, int height, int width,
                   std::span<const float> vec, std::span<double> out) {
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  if (features.size() != hw * channels || vec.size() != static_cast<std::size_t>(channels) || out.size() != hw)
    throw std::invalid_argument("score_heatmap: channel or size mismatch");
  for (std::size_t i = 0; i < hw; ++i) {
    float acc = 0.0f;
    for (int c = 0; c < channels; ++c) acc += features[static_cast<std::size_t>(c) * hw + i] * vec[c];
    out[i] = acc;
  }
}

void cross_correlate(const OccupancyMap& map, const TrajectoryKernel& kernel, Grid<double>& out) {
  out = Grid<double>(map.width(), map.height(), 0.0);
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x) {
      double acc = 0.0;
      for (int ky = 0; ky < kernel.height(); ++ky)
        for (int kx = 0; kx < kernel.width(); ++kx)
          if (map.free(x - kernel.anchor.x + kx, y - kernel.anchor.y + ky)) acc += kernel.weights(kx, ky);
      out(x, y) = acc;
    }
}

template void conv2d_forward<float>(const ConvShape&, std::span<const float>, std::span<const float>,
                                    std::span<const float>, std::span<float>);
template void conv2d_forward<double>(const ConvShape&, std::span<const double>, std::span<const double>,
                                     std::span<const double>, std::span<double>);
template void conv2d_backward<float>(const ConvShape&, std::span<const float>, std::span<const float>,
                                     std::span<const float>, std::span<float>, std::span<float>,
                                     std::span<float>);
template void conv2d_backward<double>(const ConvShape&, std::span<const double>, std::span<const double>,
                                      std::span<const double>, std::span<double>, std::span<double>,
                                      std::span<double>);

}  // namespace reference

}  // namespace mapprior
