#include "mapprior/graph.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Core>

#include "mapprior/kernels.hpp"

namespace mapprior {

std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream ss;
  ss << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) ss << (i ? "," : "") << shape[i];
  ss << ')';
  return ss.str();
}

const char* op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Param: return "param";
    case Op::Conv2d: return "conv2d";
    case Op::MaxPool2: return "max_pool2";
    case Op::Upsample2: return "upsample2";
    case Op::Concat: return "concat";
    case Op::Relu: return "relu";
    case Op::Sigmoid: return "sigmoid";
    case Op::Tanh: return "tanh";
    case Op::LstmCell: return "lstm_cell";
    case Op::Slice: return "slice";
    case Op::Score: return "score";
    case Op::WeightedMse: return "weighted_mse";
    case Op::Sum: return "sum";
    case Op::Add: return "add";
    case Op::Scale: return "scale";
    case Op::Threshold: return "threshold";
  }
  return "unknown";
}

namespace {

template <typename T>
T sigmoid_of(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace

template <typename T>
NodeId Graph<T>::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

template <typename T>
bool Graph<T>::any_requires(std::initializer_list<NodeId> ids) const {
  if (!record_) return false;
  for (NodeId id : ids)
    if (node(id).requires_grad) return true;
  return false;
}

template <typename T>
const Tensor<T>& Graph<T>::value(NodeId id) const {
  return node(id).value;
}

template <typename T>
NodeId Graph<T>::input(Tensor<T> value, bool requires_grad) {
  Node n{Op::Input, {}, std::move(value)};
  n.requires_grad = requires_grad && record_;
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::param(ParamId id) {
  Node n{Op::Param, {}, params_->value(id)};
  n.param = id;
  n.requires_grad = record_;
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::param(const std::string& name) {
  const ParamId id = params_->find(name);
  if (id < 0) throw GraphError("unknown parameter '" + name + "'");
  return param(id);
}

template <typename T>
NodeId Graph<T>::conv2d(NodeId x, NodeId weight, NodeId bias, int stride, int pad) {
  const Tensor<T>& in = value(x);
  const Tensor<T>& w = value(weight);
  const Tensor<T>& b = value(bias);
  require(in.rank() == 3 && w.rank() == 4 && b.rank() == 1, "conv2d: expected (C,H,W), (O,C,k,k), (O)");
  require(w.dim(1) == in.dim(0), "conv2d: weight expects " + std::to_string(w.dim(1)) + " channels, input has " +
                                     std::to_string(in.dim(0)));
  require(w.dim(2) == w.dim(3) && b.dim(0) == w.dim(0), "conv2d: kernel must be square and bias match outputs");
  ConvShape s{in.dim(0), in.dim(1), in.dim(2), w.dim(0), w.dim(2), stride, pad};
  s.validate();
  Node n{Op::Conv2d, {x, weight, bias}, Tensor<T>({s.out_channels, s.out_height(), s.out_width()})};
  n.stride = stride;
  n.pad = pad;
  kernels::conv2d_forward<T>(s, in.data(), w.data(), b.data(), n.value.data(), scratch_);
  n.requires_grad = any_requires({x, weight, bias});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::max_pool2(NodeId x) {
  const Tensor<T>& in = value(x);
  require(in.rank() == 3 && in.dim(1) % 2 == 0 && in.dim(2) % 2 == 0, "max_pool2: needs (C,H,W) with even H,W");
  const int c = in.dim(0), h = in.dim(1), w = in.dim(2), ho = h / 2, wo = w / 2;
  Node n{Op::MaxPool2, {x}, Tensor<T>({c, ho, wo})};
  n.requires_grad = any_requires({x});
  if (n.requires_grad) n.index.resize(n.value.size());
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < ho; ++i)
      for (int j = 0; j < wo; ++j) {
        std::size_t best = (static_cast<std::size_t>(ch) * h + 2 * i) * w + 2 * j;
        for (int di = 0; di < 2; ++di)
          for (int dj = 0; dj < 2; ++dj) {
            const std::size_t k = (static_cast<std::size_t>(ch) * h + 2 * i + di) * w + 2 * j + dj;
            if (in[k] > in[best]) best = k;
          }
        const std::size_t o = (static_cast<std::size_t>(ch) * ho + i) * wo + j;
        n.value[o] = in[best];
        if (n.requires_grad) n.index[o] = static_cast<std::uint32_t>(best);
      }
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::upsample2(NodeId x) {
  const Tensor<T>& in = value(x);
  require(in.rank() == 3, "upsample2: needs (C,H,W)");
  const int c = in.dim(0), h = in.dim(1), w = in.dim(2);
  Node n{Op::Upsample2, {x}, Tensor<T>({c, 2 * h, 2 * w})};
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < 2 * h; ++i)
      for (int j = 0; j < 2 * w; ++j)
        n.value[(static_cast<std::size_t>(ch) * 2 * h + i) * 2 * w + j] =
            in[(static_cast<std::size_t>(ch) * h + i / 2) * w + j / 2];
  n.requires_grad = any_requires({x});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::concat(NodeId a, NodeId b) {
  const Tensor<T>& ta = value(a);
  const Tensor<T>& tb = value(b);
  require(ta.rank() == 3 && tb.rank() == 3 && ta.dim(1) == tb.dim(1) && ta.dim(2) == tb.dim(2),
          "concat: spatial dims differ " + shape_string(ta.shape()) + " vs " + shape_string(tb.shape()));
  Node n{Op::Concat, {a, b}, Tensor<T>({ta.dim(0) + tb.dim(0), ta.dim(1), ta.dim(2)})};
  std::copy(ta.data().begin(), ta.data().end(), n.value.data().begin());
  std::copy(tb.data().begin(), tb.data().end(), n.value.data().begin() + static_cast<std::ptrdiff_t>(ta.size()));
  n.requires_grad = any_requires({a, b});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::relu(NodeId x) {
  Node n{Op::Relu, {x}, value(x)};
  for (T& v : n.value.data()) v = v > T(0) ? v : T(0);
  n.requires_grad = any_requires({x});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::sigmoid(NodeId x) {
  Node n{Op::Sigmoid, {x}, value(x)};
  for (T& v : n.value.data()) v = sigmoid_of(v);
  n.requires_grad = any_requires({x});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::tanh(NodeId x) {
  Node n{Op::Tanh, {x}, value(x)};
  for (T& v : n.value.data()) v = std::tanh(v);
  n.requires_grad = any_requires({x});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::lstm_cell(NodeId x, NodeId state, NodeId weight, NodeId bias) {
  const Tensor<T>& in = value(x);
  const Tensor<T>& st = value(state);
  const Tensor<T>& w = value(weight);
  const Tensor<T>& b = value(bias);
  require(st.rank() == 1 && st.dim(0) % 2 == 0, "lstm_cell: state must be (2H)");
  const int hidden = st.dim(0) / 2;
  const int features = static_cast<int>(in.size());
  require(w.rank() == 2 && w.dim(0) == 4 * hidden && w.dim(1) == features + hidden,
          "lstm_cell: weight " + shape_string(w.shape()) + " does not match input " + std::to_string(features) +
              " and hidden " + std::to_string(hidden));
  require(b.rank() == 1 && b.dim(0) == 4 * hidden, "lstm_cell: bias must be (4H)");

  Vec<T> xh(features + hidden);
  for (int i = 0; i < features; ++i) xh[i] = in[static_cast<std::size_t>(i)];
  for (int i = 0; i < hidden; ++i) xh[features + i] = st[static_cast<std::size_t>(i)];
  Eigen::Map<const RowMat<T>> wm(w.ptr(), 4 * hidden, features + hidden);
  Eigen::Map<const Vec<T>> bv(b.ptr(), 4 * hidden);
  const Vec<T> z = wm * xh + bv;

  Node n{Op::LstmCell, {x, state, weight, bias}, Tensor<T>({2 * hidden})};
  // aux layout: i, f, g, o, tanh(c')
  n.aux.resize(static_cast<std::size_t>(5 * hidden));
  for (int k = 0; k < hidden; ++k) {
    const T ig = sigmoid_of(z[k]);
    const T fg = sigmoid_of(z[hidden + k]);
    const T gg = std::tanh(z[2 * hidden + k]);
    const T og = sigmoid_of(z[3 * hidden + k]);
    const T c = fg * st[static_cast<std::size_t>(hidden + k)] + ig * gg;
    const T tc = std::tanh(c);
    n.value[static_cast<std::size_t>(k)] = og * tc;
    n.value[static_cast<std::size_t>(hidden + k)] = c;
    n.aux[static_cast<std::size_t>(k)] = ig;
    n.aux[static_cast<std::size_t>(hidden + k)] = fg;
    n.aux[static_cast<std::size_t>(2 * hidden + k)] = gg;
    n.aux[static_cast<std::size_t>(3 * hidden + k)] = og;
    n.aux[static_cast<std::size_t>(4 * hidden + k)] = tc;
  }
  n.requires_grad = any_requires({x, state, weight, bias});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::slice(NodeId x, std::size_t offset, std::size_t length) {
  const Tensor<T>& in = value(x);
  require(offset + length <= in.size(), "slice: range out of bounds");
  Node n{Op::Slice, {x}, Tensor<T>({static_cast<int>(length)})};
  std::copy_n(in.data().begin() + static_cast<std::ptrdiff_t>(offset), length, n.value.data().begin());
  n.offset = offset;
  n.requires_grad = any_requires({x});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::score(NodeId features, NodeId vec) {
  const Tensor<T>& f = value(features);
  const Tensor<T>& v = value(vec);
  require(f.rank() == 3, "score: features must be (C,H,W)");
  require(v.size() == static_cast<std::size_t>(f.dim(0)),
          "score: channel mismatch, map has " + std::to_string(f.dim(0)) + ", vector has " + std::to_string(v.size()));
  const int c = f.dim(0);
  const Eigen::Index hw = static_cast<Eigen::Index>(f.dim(1)) * f.dim(2);
  Node n{Op::Score, {features, vec}, Tensor<T>({f.dim(1), f.dim(2)})};
  Eigen::Map<const RowMat<T>> fm(f.ptr(), c, hw);
  Eigen::Map<const Vec<T>> vv(v.ptr(), c);
  Eigen::Map<Vec<T>> out(n.value.ptr(), hw);
  out.noalias() = fm.transpose() * vv;
  n.requires_grad = any_requires({features, vec});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::weighted_mse(NodeId pred, Tensor<T> target, Tensor<T> weights) {
  const Tensor<T>& p = value(pred);
  require(p.size() == target.size() && p.size() == weights.size() && p.size() > 0,
          "weighted_mse: prediction, target and weights must have the same size");
  T acc = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const T d = p[i] - target[i];
    acc += weights[i] * d * d;
  }
  Node n{Op::WeightedMse, {pred}, Tensor<T>::scalar(acc / static_cast<T>(p.size()))};
  n.target = std::move(target);
  n.weights = std::move(weights);
  n.requires_grad = any_requires({pred});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::sum(NodeId x) {
  T acc = 0;
  for (T v : value(x).data()) acc += v;
  Node n{Op::Sum, {x}, Tensor<T>::scalar(acc)};
  n.requires_grad = any_requires({x});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::add(NodeId a, NodeId b) {
  require(value(a).same_shape(value(b)), "add: shapes differ");
  Node n{Op::Add, {a, b}, value(a)};
  const Tensor<T>& tb = value(b);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += tb[i];
  n.requires_grad = any_requires({a, b});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::scale(NodeId x, T factor) {
  Node n{Op::Scale, {x}, value(x)};
  for (T& v : n.value.data()) v *= factor;
  n.factor = factor;
  n.requires_grad = any_requires({x});
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::threshold(NodeId x) {
  Node n{Op::Threshold, {x}, value(x)};
  for (T& v : n.value.data()) v = v > T(0) ? T(1) : T(0);
  n.requires_grad = any_requires({x});
  return push(std::move(n));
}

// --- backward -----------------------------------------------------------------

template <typename T>
std::span<T> Graph<T>::grad_buffer(NodeId id) {
  Node& n = node(id);
  if (n.op == Op::Param) return param_grads_->tensors.at(static_cast<std::size_t>(n.param)).data();
  Tensor<T>& g = grads_.at(static_cast<std::size_t>(id));
  if (g.size() != n.value.size()) g = Tensor<T>(n.value.shape(), T(0));
  return g.data();
}

template <typename T>
const Tensor<T>& Graph<T>::grad(NodeId id) const {
  const Tensor<T>& g = grads_.at(static_cast<std::size_t>(id));
  if (g.size() != node(id).value.size()) throw GraphError("no gradient recorded for node");
  return g;
}

template <typename T>
void Graph<T>::backward(NodeId root, Gradients<T>& grads) {
  if (!record_) throw GraphError("backward on a graph recorded without gradient tape");
  if (value(root).size() != 1) throw GraphError("backward root must be a scalar");
  if (grads.tensors.size() != params_->size()) throw ShapeError("gradient set does not match parameters");
  param_grads_ = &grads;
  grads_.assign(nodes_.size(), Tensor<T>());
  if (!node(root).requires_grad) return;
  grad_buffer(root)[0] = T(1);
  for (NodeId id = root; id >= 0; --id) {
    const Node& n = node(id);
    if (!n.requires_grad || n.op == Op::Input || n.op == Op::Param) continue;
    const Tensor<T>& g = grads_[static_cast<std::size_t>(id)];
    if (g.size() == 0) continue;  // not on a path to the root
    backward_node(id);
  }
  param_grads_ = nullptr;
}

template <typename T>
void Graph<T>::backward_node(NodeId id) {
  const Node& n = node(id);
  const std::span<const T> dy = grads_[static_cast<std::size_t>(id)].data();
  const auto needs = [&](std::size_t k) { return node(n.inputs[k]).requires_grad; };

  switch (n.op) {
    case Op::Conv2d: {
      const Tensor<T>& in = value(n.inputs[0]);
      const Tensor<T>& w = value(n.inputs[1]);
      ConvShape s{in.dim(0), in.dim(1), in.dim(2), w.dim(0), w.dim(2), n.stride, n.pad};
      std::span<T> din = needs(0) ? grad_buffer(n.inputs[0]) : std::span<T>{};
      // weight/bias gradients may be unused leaves; a throwaway buffer keeps the kernel simple
      std::vector<T> tmp_w, tmp_b;
      std::span<T> dw, db;
      if (needs(1)) {
        dw = grad_buffer(n.inputs[1]);
      } else {
        tmp_w.assign(w.size(), T(0));
        dw = tmp_w;
      }
      if (needs(2)) {
        db = grad_buffer(n.inputs[2]);
      } else {
        tmp_b.assign(static_cast<std::size_t>(w.dim(0)), T(0));
        db = tmp_b;
      }
      kernels::conv2d_backward<T>(s, in.data(), w.data(), dy, din, dw, db, scratch_);
      break;
    }
    case Op::MaxPool2: {
      std::span<T> dx = grad_buffer(n.inputs[0]);
      for (std::size_t o = 0; o < dy.size(); ++o) dx[n.index[o]] += dy[o];
      break;
    }
    case Op::Upsample2: {
      const Tensor<T>& in = value(n.inputs[0]);
      const int c = in.dim(0), h = in.dim(1), w = in.dim(2);
      std::span<T> dx = grad_buffer(n.inputs[0]);
      for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < 2 * h; ++i)
          for (int j = 0; j < 2 * w; ++j)
            dx[(static_cast<std::size_t>(ch) * h + i / 2) * w + j / 2] +=
                dy[(static_cast<std::size_t>(ch) * 2 * h + i) * 2 * w + j];
      break;
    }
    case Op::Concat: {
      const std::size_t na = value(n.inputs[0]).size();
      if (needs(0)) {
        std::span<T> da = grad_buffer(n.inputs[0]);
        for (std::size_t i = 0; i < na; ++i) da[i] += dy[i];
      }
      if (needs(1)) {
        std::span<T> db = grad_buffer(n.inputs[1]);
        for (std::size_t i = 0; i < db.size(); ++i) db[i] += dy[na + i];
      }
      break;
    }
    case Op::Relu: {
      std::span<T> dx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < dy.size(); ++i)
        if (n.value[i] > T(0)) dx[i] += dy[i];
      break;
    }
    case Op::Sigmoid: {
      std::span<T> dx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * n.value[i] * (T(1) - n.value[i]);
      break;
    }
    case Op::Tanh: {
      std::span<T> dx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * (T(1) - n.value[i] * n.value[i]);
      break;
    }
    case Op::LstmCell: {
      const Tensor<T>& in = value(n.inputs[0]);
      const Tensor<T>& st = value(n.inputs[1]);
      const Tensor<T>& w = value(n.inputs[2]);
      const int hidden = st.dim(0) / 2;
      const int features = static_cast<int>(in.size());
      const auto a = [&](int block, int k) { return n.aux[static_cast<std::size_t>(block * hidden + k)]; };
      Vec<T> dz(4 * hidden);
      Vec<T> dc_prev(hidden);
      for (int k = 0; k < hidden; ++k) {
        const T ig = a(0, k), fg = a(1, k), gg = a(2, k), og = a(3, k), tc = a(4, k);
        const T dh = dy[static_cast<std::size_t>(k)];
        const T dc = dy[static_cast<std::size_t>(hidden + k)] + dh * og * (T(1) - tc * tc);
        const T c_prev = st[static_cast<std::size_t>(hidden + k)];
        dz[k] = dc * gg * ig * (T(1) - ig);
        dz[hidden + k] = dc * c_prev * fg * (T(1) - fg);
        dz[2 * hidden + k] = dc * ig * (T(1) - gg * gg);
        dz[3 * hidden + k] = dh * tc * og * (T(1) - og);
        dc_prev[k] = dc * fg;
      }
      if (needs(2)) {
        Vec<T> xh(features + hidden);
        for (int i = 0; i < features; ++i) xh[i] = in[static_cast<std::size_t>(i)];
        for (int i = 0; i < hidden; ++i) xh[features + i] = st[static_cast<std::size_t>(i)];
        Eigen::Map<RowMat<T>> dw(grad_buffer(n.inputs[2]).data(), 4 * hidden, features + hidden);
        dw.noalias() += dz * xh.transpose();
      }
      if (needs(3)) {
        std::span<T> db = grad_buffer(n.inputs[3]);
        for (int k = 0; k < 4 * hidden; ++k) db[static_cast<std::size_t>(k)] += dz[k];
      }
      if (needs(0) || needs(1)) {
        Eigen::Map<const RowMat<T>> wm(w.ptr(), 4 * hidden, features + hidden);
        const Vec<T> dxh = wm.transpose() * dz;
        if (needs(0)) {
          std::span<T> dx = grad_buffer(n.inputs[0]);
          for (int i = 0; i < features; ++i) dx[static_cast<std::size_t>(i)] += dxh[i];
        }
        if (needs(1)) {
          std::span<T> ds = grad_buffer(n.inputs[1]);
          for (int i = 0; i < hidden; ++i) {
            ds[static_cast<std::size_t>(i)] += dxh[features + i];
            ds[static_cast<std::size_t>(hidden + i)] += dc_prev[i];
          }
        }
      }
      break;
    }
    case Op::Slice: {
      std::span<T> dx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[n.offset + i] += dy[i];
      break;
    }
    case Op::Score: {
      const Tensor<T>& f = value(n.inputs[0]);
      const Tensor<T>& v = value(n.inputs[1]);
      const int c = f.dim(0);
      const Eigen::Index hw = static_cast<Eigen::Index>(f.dim(1)) * f.dim(2);
      Eigen::Map<const Vec<T>> g(dy.data(), hw);
      if (needs(0)) {
        Eigen::Map<RowMat<T>> df(grad_buffer(n.inputs[0]).data(), c, hw);
        Eigen::Map<const Vec<T>> vv(v.ptr(), c);
        df.noalias() += vv * g.transpose();
      }
      if (needs(1)) {
        Eigen::Map<const RowMat<T>> fm(f.ptr(), c, hw);
        Eigen::Map<Vec<T>> dv(grad_buffer(n.inputs[1]).data(), c);
        dv.noalias() += fm * g;
      }
      break;
    }
    case Op::WeightedMse: {
      const Tensor<T>& p = value(n.inputs[0]);
      std::span<T> dx = grad_buffer(n.inputs[0]);
      const T k = T(2) * dy[0] / static_cast<T>(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) dx[i] += k * n.weights[i] * (p[i] - n.target[i]);
      break;
    }
    case Op::Sum: {
      std::span<T> dx = grad_buffer(n.inputs[0]);
      for (T& v : dx) v += dy[0];
      break;
    }
    case Op::Add: {
      for (std::size_t k = 0; k < 2; ++k) {
        if (!needs(k)) continue;
        std::span<T> dx = grad_buffer(n.inputs[k]);
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
      }
      break;
    }
    case Op::Scale: {
      std::span<T> dx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += n.factor * dy[i];
      break;
    }
    default:
      throw GraphError(std::string("unsupported op in graph: ") + op_name(n.op) + " has no gradient");
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace mapprior
