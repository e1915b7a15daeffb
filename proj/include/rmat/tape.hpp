#pragma once

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rmat/tensor.hpp"

namespace rmat {

// A named trainable tensor with its gradient accumulator. Gradients must be
// reset (zero_grad) before every backward pass; Tape::backward refuses to
// deposit into a parameter whose gradient is still armed from a previous
// pass, so accidental doubling fails fast instead of corrupting training.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool grad_ready = false;
  std::optional<double> min_value;  // optimizer clamps the value from below

  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() {
    grad = Tensor(value.shape());
    grad_ready = false;
  }
};

using NodeId = int;

// Append-only reverse-mode tape over the fixed operation set the matching
// pipeline needs. Forward values are computed eagerly through the kernels in
// rmat::ops, so a taped forward pass is bit-identical to the tape-free one.
//
// One reverse sweep per tape: backward() a second time is an error, and
// there is no gradient-of-gradient mechanism (the reverse sweep itself is
// never recorded), so higher-order differentiation is rejected by
// construction.
class Tape {
 public:
  Tape() { nodes_.reserve(1024); }

  // Leaves.
  NodeId constant(Tensor v) { return leaf(std::move(v), false); }
  NodeId variable(Tensor v) { return leaf(std::move(v), true); }
  NodeId param(Parameter& p);

  const Tensor& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  // Gradient w.r.t. a node, valid after backward(); zeros if unreachable.
  Tensor grad(NodeId id) const;

  void backward(NodeId loss);
  bool backward_done() const { return backward_done_; }
  std::size_t size() const { return nodes_.size(); }

  // Elementwise.
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId div(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId square(NodeId a);
  NodeId sqrt(NodeId a);
  NodeId log(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId relu(NodeId a);
  NodeId elu(NodeId a);
  NodeId tanh(NodeId a);
  NodeId leaky_relu(NodeId a, double slope);
  NodeId clamp(NodeId a, double lo, double hi);

  // Linear algebra.
  NodeId conv2d(NodeId x, NodeId kernel, NodeId bias, int stride, int padding);
  NodeId linear(NodeId x, NodeId w, NodeId b);
  NodeId bilinear(NodeId a, NodeId m, NodeId b);
  NodeId matmul(NodeId a, NodeId b);
  NodeId axis_scale(NodeId x, NodeId s, int axis);
  NodeId outer_sum(NodeId a, NodeId b);
  NodeId concat_cols(const std::vector<NodeId>& parts);
  NodeId stack_rows(const std::vector<NodeId>& rows);
  NodeId avg_pool(NodeId x, int grid);
  NodeId reshape(NodeId x, std::vector<int> shape);

  // Reductions.
  NodeId mean_all(NodeId x);
  NodeId sum_all(NodeId x);
  NodeId mean_axis(NodeId x, int axis);
  NodeId softmax_axis(NodeId x, int axis);

 private:
  struct Node {
    Tensor value;
    std::function<void(Tape&, NodeId self)> backprop;  // empty for leaves
    Parameter* bound = nullptr;
    bool needs_grad = false;
  };

  NodeId leaf(Tensor v, bool needs_grad);
  NodeId push(Tensor value, bool needs_grad, std::function<void(Tape&, NodeId)> backprop);
  bool wants(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

  // Gradient accumulation during the reverse sweep.
  void accum(NodeId id, const Tensor& g);
  Tensor* grad_slot(NodeId id);
  const Tensor& out_grad(NodeId id) const { return grads_[static_cast<std::size_t>(id)]; }

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<char> has_grad_;
  std::unordered_map<const Parameter*, NodeId> param_nodes_;
  bool backward_done_ = false;
};

}  // namespace rmat
