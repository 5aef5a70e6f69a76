#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

#include "mapprior/tensor.hpp"

namespace mapprior {

enum class Op : std::uint8_t {
  Input,
  Param,
  Conv2d,
  MaxPool2,
  Upsample2,
  Concat,
  Relu,
  Sigmoid,
  Tanh,
  LstmCell,
  Slice,
  Score,
  WeightedMse,
  Sum,
  Add,
  Scale,
  Threshold,  // forward-only; has no gradient
};

const char* op_name(Op op);

class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using NodeId = int;

/// Tape of tensor operations over a fixed ParameterSet. Nodes are appended in
/// evaluation order, so reverse creation order is a valid backward schedule.
/// Built with `record = false` the graph evaluates but refuses backward().
template <typename T>
class Graph {
 public:
  explicit Graph(const ParameterSet<T>& params, bool record = true) : params_(&params), record_(record) {}

  NodeId input(Tensor<T> value, bool requires_grad = false);
  NodeId param(ParamId id);
  /// Looks the parameter up by name; throws GraphError if absent.
  NodeId param(const std::string& name);
  const ParameterSet<T>& params() const { return *params_; }

  /// input (C,H,W), weight (O,C,k,k), bias (O).
  NodeId conv2d(NodeId x, NodeId weight, NodeId bias, int stride, int pad);
  NodeId max_pool2(NodeId x);
  NodeId upsample2(NodeId x);
  /// Channel concatenation of two (C,H,W) tensors.
  NodeId concat(NodeId a, NodeId b);
  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId tanh(NodeId x);
  /// One LSTM step. `state` is (2H) = [h; c]; weight (4H, in+H) with gate
  /// rows ordered input, forget, candidate, output; bias (4H). Returns the
  /// new [h; c].
  NodeId lstm_cell(NodeId x, NodeId state, NodeId weight, NodeId bias);
  /// Contiguous range of the flattened input as a rank-1 tensor.
  NodeId slice(NodeId x, std::size_t offset, std::size_t length);
  /// Per-cell dot product of a (C,H,W) feature map with a (C) vector.
  NodeId score(NodeId features, NodeId vec);
  /// mean_i w_i (pred_i - target_i)^2 as a scalar.
  NodeId weighted_mse(NodeId pred, Tensor<T> target, Tensor<T> weights);
  NodeId sum(NodeId x);
  NodeId add(NodeId a, NodeId b);
  NodeId scale(NodeId x, T factor);
  /// 1 where x > 0, else 0. Not differentiable.
  NodeId threshold(NodeId x);

  const Tensor<T>& value(NodeId id) const;
  Op op(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)).op; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse-mode pass from a scalar root. Parameter gradients are
  /// accumulated into `grads`; gradients of inputs created with
  /// requires_grad are available through grad().
  void backward(NodeId root, Gradients<T>& grads);
  const Tensor<T>& grad(NodeId id) const;

 private:
  struct Node {
    Node(Op o, std::vector<NodeId> in, Tensor<T> v) : op(o), inputs(std::move(in)), value(std::move(v)) {}

    Op op;
    std::vector<NodeId> inputs;
    Tensor<T> value;
    ParamId param = -1;
    bool requires_grad = false;
    int stride = 1;
    int pad = 0;
    std::size_t offset = 0;
    T factor = T(1);
    std::vector<std::uint32_t> index;  // max-pool argmax
    std::vector<T> aux;                // saved activations
    Tensor<T> target;
    Tensor<T> weights;
  };

  NodeId push(Node node);
  Node& node(NodeId id) { return nodes_.at(static_cast<std::size_t>(id)); }
  const Node& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  bool any_requires(std::initializer_list<NodeId> ids) const;
  std::span<T> grad_buffer(NodeId id);
  void backward_node(NodeId id);

  const ParameterSet<T>* params_;
  bool record_;
  std::vector<Node> nodes_;
  std::vector<Tensor<T>> grads_;
  Gradients<T>* param_grads_ = nullptr;
  std::vector<T> scratch_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace mapprior
