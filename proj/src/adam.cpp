#include "mapprior/adam.hpp"

#include <cmath>

namespace mapprior {

template <typename T>
AdamState<T> AdamState<T>::for_params(const ParameterSet<T>& params, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& shape = params.value_shape(static_cast<ParamId>(i));
    s.m.emplace_back(shape, T(0));
    s.v.emplace_back(shape, T(0));
  }
  return s;
}

template <typename T>
void adam_step(ParameterSet<T>& params, const Gradients<T>& grads, AdamState<T>& state) {
  const std::size_t n = params.size();
  if (grads.tensors.size() != n || state.m.size() != n || state.v.size() != n)
    throw ShapeError("adam_step: parameter, gradient and moment counts differ");
  for (std::size_t i = 0; i < n; ++i) {
    const auto& shape = params.value_shape(static_cast<ParamId>(i));
    if (grads.tensors[i].shape() != shape || state.m[i].shape() != shape || state.v[i].shape() != shape)
      throw ShapeError("adam_step: shape mismatch for '" + params.name(static_cast<ParamId>(i)) + "'");
  }
  ++state.step;
  const AdamConfig& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < n; ++i) {
    std::span<T> p = params.data(static_cast<ParamId>(i));
    std::span<const T> g = grads.tensors[i].data();
    std::span<T> m = state.m[i].data();
    std::span<T> v = state.v[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g[j];
      const double mj = c.beta1 * m[j] + (1.0 - c.beta1) * gj;
      const double vj = c.beta2 * v[j] + (1.0 - c.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double mhat = mj / bc1, vhat = vj / bc2;
      p[j] = static_cast<T>(p[j] - c.lr * mhat / (std::sqrt(vhat) + c.eps));
    }
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(ParameterSet<float>&, const Gradients<float>&, AdamState<float>&);
template void adam_step<double>(ParameterSet<double>&, const Gradients<double>&, AdamState<double>&);

}  // namespace mapprior
