#pragma once

#include <cstdint>

#include "mapprior/tensor.hpp"

namespace mapprior {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::int64_t step = 0;

  static AdamState for_params(const ParameterSet<T>& params, AdamConfig config = {});
};

/// One bias-corrected Adam update in place. Throws ShapeError when the
/// gradients or moments do not match the parameters.
template <typename T>
void adam_step(ParameterSet<T>& params, const Gradients<T>& grads, AdamState<T>& state);

extern template struct AdamState<float>;
extern template struct AdamState<double>;

}  // namespace mapprior
