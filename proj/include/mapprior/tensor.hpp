#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mapprior {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major tensor of rank 0..4: (C,H,W) maps, (T,F) sequences,
/// (N) vectors, scalars.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, T fill = T(0)) : shape_(std::move(shape)) {
    check_shape();
    data_.assign(count(shape_), fill);
  }
  Tensor(std::vector<int> shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    if (data_.size() != count(shape_)) throw ShapeError("tensor data length does not match shape");
  }

  static Tensor scalar(T v) { return Tensor({}, std::vector<T>{v}); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return data_.size(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T* ptr() { return data_.data(); }
  const T* ptr() const { return data_.data(); }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T item() const {
    if (data_.size() != 1) throw ShapeError("item() on a tensor with " + std::to_string(data_.size()) + " values");
    return data_[0];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  static std::size_t count(const std::vector<int>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  void check_shape() const {
    if (shape_.size() > 4) throw ShapeError("tensor rank above 4");
    for (int d : shape_)
      if (d < 0) throw ShapeError("negative tensor dimension");
  }

  std::vector<int> shape_;
  std::vector<T> data_;
};

std::string shape_string(const std::vector<int>& shape);

using ParamId = int;

/// Named, ordered model parameters. Shapes are fixed once added.
template <typename T>
class ParameterSet {
 public:
  ParamId add(std::string name, Tensor<T> value) {
    if (find(name) >= 0) throw std::invalid_argument("duplicate parameter '" + name + "'");
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return static_cast<ParamId>(values_.size() - 1);
  }

  std::size_t size() const { return values_.size(); }
  const std::string& name(ParamId id) const { return names_.at(static_cast<std::size_t>(id)); }
  const Tensor<T>& value(ParamId id) const { return values_.at(static_cast<std::size_t>(id)); }
  /// Mutable access to the values; shapes must not change.
  std::span<T> data(ParamId id) { return values_.at(static_cast<std::size_t>(id)).data(); }

  ParamId find(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    return it == names_.end() ? -1 : static_cast<ParamId>(it - names_.begin());
  }

  /// Replaces a value with one of identical shape.
  void assign(ParamId id, Tensor<T> value) {
    if (!values_.at(static_cast<std::size_t>(id)).same_shape(value))
      throw ShapeError("parameter '" + name(id) + "' shape is fixed at " + shape_string(value_shape(id)));
    values_[static_cast<std::size_t>(id)] = std::move(value);
  }
  const std::vector<int>& value_shape(ParamId id) const { return value(id).shape(); }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (std::size_t i = 0; i < values_.size(); ++i) out.add(names_[i], values_[i].template cast<U>());
    return out;
  }

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> values_;
};

/// One gradient tensor per parameter, shaped like the parameter.
template <typename T>
struct Gradients {
  std::vector<Tensor<T>> tensors;

  static Gradients zeros_like(const ParameterSet<T>& params) {
    Gradients g;
    for (std::size_t i = 0; i < params.size(); ++i)
      g.tensors.emplace_back(params.value(static_cast<ParamId>(i)).shape(), T(0));
    return g;
  }

  void zero() {
    for (auto& t : tensors) t.fill(T(0));
  }

  void add(const Gradients& other) {
    if (other.tensors.size() != tensors.size()) throw ShapeError("gradient sets differ in size");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      if (!tensors[i].same_shape(other.tensors[i])) throw ShapeError("gradient shape mismatch");
      auto dst = tensors[i].data();
      auto src = other.tensors[i].data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }

  void scale(T s) {
    for (auto& t : tensors)
      for (T& v : t.data()) v *= s;
  }
};

}  // namespace mapprior
