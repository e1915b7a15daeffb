#include "rmat/tape.hpp"

#include "rmat/ops.hpp"

namespace rmat {

NodeId Tape::leaf(Tensor v, bool needs_grad) {
  return push(std::move(v), needs_grad, nullptr);
}

NodeId Tape::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return it->second;
  const NodeId id = push(p.value, true, nullptr);
  nodes_[static_cast<std::size_t>(id)].bound = &p;
  param_nodes_.emplace(&p, id);
  return id;
}

NodeId Tape::push(Tensor value, bool needs_grad, std::function<void(Tape&, NodeId)> backprop) {
  nodes_.push_back(Node{std::move(value), std::move(backprop), nullptr, needs_grad});
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tensor* Tape::grad_slot(NodeId id) {
  const auto i = static_cast<std::size_t>(id);
  if (!has_grad_[i]) {
    grads_[i] = Tensor(nodes_[i].value.shape());
    has_grad_[i] = 1;
  }
  return &grads_[i];
}

void Tape::accum(NodeId id, const Tensor& g) {
  if (!wants(id)) return;
  Tensor* slot = grad_slot(id);
  for (std::size_t i = 0; i < g.numel(); ++i) (*slot)[i] += g[i];
}

Tensor Tape::grad(NodeId id) const {
  const auto i = static_cast<std::size_t>(id);
  if (i < has_grad_.size() && has_grad_[i]) return grads_[i];
  return Tensor(nodes_[i].value.shape());
}

void Tape::backward(NodeId loss) {
  if (backward_done_) {
    throw ValidationError("backward already run on this tape; build a fresh tape per pass");
  }
  if (value(loss).numel() != 1) {
    throw ValidationError("backward: output must be a scalar, got shape " +
                          value(loss).shape_str());
  }
  for (const auto& [p, id] : param_nodes_) {
    if (p->grad_ready) {
      throw ValidationError("backward: gradient of parameter '" + p->name +
                            "' is still armed from a previous pass; call zero_grad first");
    }
  }
  grads_.assign(nodes_.size(), Tensor());
  has_grad_.assign(nodes_.size(), 0);
  grads_[static_cast<std::size_t>(loss)] = Tensor::scalar(1.0);
  has_grad_[static_cast<std::size_t>(loss)] = 1;

  for (NodeId id = loss; id >= 0; --id) {
    const auto i = static_cast<std::size_t>(id);
    if (!has_grad_[i] || !nodes_[i].needs_grad) continue;
    if (nodes_[i].backprop) nodes_[i].backprop(*this, id);
  }
  for (auto& [p, id] : param_nodes_) {
    Parameter* par = const_cast<Parameter*>(p);
    if (has_grad_[static_cast<std::size_t>(id)]) {
      const Tensor& g = grads_[static_cast<std::size_t>(id)];
      for (std::size_t i = 0; i < g.numel(); ++i) par->grad[i] += g[i];
    }
    par->grad_ready = true;
  }
  backward_done_ = true;
}

// ---- elementwise ------------------------------------------------------------

NodeId Tape::add(NodeId a, NodeId b) {
  return push(ops::add(value(a), value(b)), wants(a) || wants(b),
              [a, b](Tape& t, NodeId self) {
                const Tensor& g = t.out_grad(self);
                t.accum(a, g);
                t.accum(b, g);
              });
}

NodeId Tape::sub(NodeId a, NodeId b) {
  return push(ops::sub(value(a), value(b)), wants(a) || wants(b),
              [a, b](Tape& t, NodeId self) {
                const Tensor& g = t.out_grad(self);
                t.accum(a, g);
                if (t.wants(b)) t.accum(b, ops::scale(g, -1.0));
              });
}

NodeId Tape::mul(NodeId a, NodeId b) {
  return push(ops::mul(value(a), value(b)), wants(a) || wants(b),
              [a, b](Tape& t, NodeId self) {
                const Tensor& g = t.out_grad(self);
                if (t.wants(a)) t.accum(a, ops::mul(g, t.value(b)));
                if (t.wants(b)) t.accum(b, ops::mul(g, t.value(a)));
              });
}

NodeId Tape::div(NodeId a, NodeId b) {
  return push(ops::div(value(a), value(b)), wants(a) || wants(b),
              [a, b](Tape& t, NodeId self) {
                const Tensor& g = t.out_grad(self);
                const Tensor& bv = t.value(b);
                if (t.wants(a)) t.accum(a, ops::div(g, bv));
                if (t.wants(b)) {
                  Tensor gb(bv.shape());
                  const Tensor& av = t.value(a);
                  for (std::size_t i = 0; i < gb.numel(); ++i) {
                    gb[i] = -g[i] * av[i] / (bv[i] * bv[i]);
                  }
                  t.accum(b, gb);
                }
              });
}

NodeId Tape::scale(NodeId a, double c) {
  return push(ops::scale(value(a), c), wants(a), [a, c](Tape& t, NodeId self) {
    t.accum(a, ops::scale(t.out_grad(self), c));
  });
}

NodeId Tape::square(NodeId a) {
  return push(ops::square(value(a)), wants(a), [a](Tape& t, NodeId self) {
    const Tensor& g = t.out_grad(self);
    const Tensor& x = t.value(a);
    Tensor gx(x.shape());
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] = 2.0 * x[i] * g[i];
    t.accum(a, gx);
  });
}

NodeId Tape::sqrt(NodeId a) {
  return push(ops::sqrt(value(a)), wants(a), [a](Tape& t, NodeId self) {
    const Tensor& g = t.out_grad(self);
    const Tensor& y = t.value(self);
    Tensor gx(y.shape());
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] = 0.5 * g[i] / y[i];
    t.accum(a, gx);
  });
}

NodeId Tape::log(NodeId a) {
  return push(ops::log(value(a)), wants(a), [a](Tape& t, NodeId self) {
    const Tensor& g = t.out_grad(self);
    const Tensor& x = t.value(a);
    Tensor gx(x.shape());
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] = g[i] / x[i];
    t.accum(a, gx);
  });
}

NodeId Tape::sigmoid(NodeId a) {
  return push(ops::sigmoid(value(a)), wants(a), [a](Tape& t, NodeId self) {
    const Tensor& g = t.out_grad(self);
    const Tensor& y = t.value(self);
    Tensor gx(y.shape());
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] = y[i] * (1.0 - y[i]) * g[i];
    t.accum(a, gx);
  });
}

NodeId Tape::relu(NodeId a) {
  return push(ops::relu(value(a)), wants(a), [a](Tape& t, NodeId self) {
    const Tensor& g = t.out_grad(self);
    const Tensor& x = t.value(a);
    Tensor gx(x.shape());
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] = x[i] > 0.0 ? g[i] : 0.0;
    t.accum(a, gx);
  });
}

NodeId Tape::elu(NodeId a) {
  return push(ops::elu(value(a)), wants(a), [a](Tape& t, NodeId self) {
    const Tensor& g = t.out_grad(self);
    const Tensor& x = t.value(a);
    const Tensor& y = t.value(self);
    Tensor gx(x.shape());
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] = x[i] > 0.0 ? g[i] : (y[i] + 1.0) * g[i];
    t.accum(a, gx);
  });
}

NodeId Tape::tanh(NodeId a) {
  return push(ops::tanh(value(a)), wants(a), [a](Tape& t, NodeId self) {
    const Tensor& g = t.out_grad(self);
    const Tensor& y = t.value(self);
    Tensor gx(y.shape());
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] = (1.0 - y[i] * y[i]) * g[i];
    t.accum(a, gx);
  });
}

NodeId Tape::leaky_relu(NodeId a, double slope) {
  return push(ops::leaky_relu(value(a), slope), wants(a), [a, slope](Tape& t, NodeId self) {
    const Tensor& g = t.out_grad(self);
    const Tensor& x = t.value(a);
    Tensor gx(x.shape());
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] = x[i] > 0.0 ? g[i] : slope * g[i];
    t.accum(a, gx);
  });
}

NodeId Tape::clamp(NodeId a, double lo, double hi) {
  return push(ops::clamp(value(a), lo, hi), wants(a), [a, lo, hi](Tape& t, NodeId self) {
    const Tensor& g = t.out_grad(self);
    const Tensor& x = t.value(a);
    Tensor gx(x.shape());
    for (std::size_t i = 0; i < gx.numel(); ++i) {
      gx[i] = (x[i] >= lo && x[i] <= hi) ? g[i] : 0.0;
    }
    t.accum(a, gx);
  });
}

// ---- linear algebra ---------------------------------------------------------

NodeId Tape::conv2d(NodeId x, NodeId kernel, NodeId bias, int stride, int padding) {
  return push(ops::conv2d(value(x), value(kernel), value(bias), stride, padding),
              wants(x) || wants(kernel) || wants(bias),
              [x, kernel, bias, stride, padding](Tape& t, NodeId self) {
                ops::conv2d_backward(t.value(x), t.value(kernel), t.out_grad(self), stride,
                                     padding, t.wants(x) ? t.grad_slot(x) : nullptr,
                                     t.wants(kernel) ? t.grad_slot(kernel) : nullptr,
                                     t.wants(bias) ? t.grad_slot(bias) : nullptr);
              });
}

NodeId Tape::linear(NodeId x, NodeId w, NodeId b) {
  return push(ops::linear(value(x), value(w), value(b)), wants(x) || wants(w) || wants(b),
              [x, w, b](Tape& t, NodeId self) {
                ops::linear_backward(t.value(x), t.value(w), t.out_grad(self),
                                     t.wants(x) ? t.grad_slot(x) : nullptr,
                                     t.wants(w) ? t.grad_slot(w) : nullptr,
                                     t.wants(b) ? t.grad_slot(b) : nullptr);
              });
}

NodeId Tape::bilinear(NodeId a, NodeId m, NodeId b) {
  return push(ops::bilinear(value(a), value(m), value(b)), wants(a) || wants(m) || wants(b),
              [a, m, b](Tape& t, NodeId self) {
                ops::bilinear_backward(t.value(a), t.value(m), t.value(b), t.out_grad(self)[0],
                                       t.wants(a) ? t.grad_slot(a) : nullptr,
                                       t.wants(m) ? t.grad_slot(m) : nullptr,
                                       t.wants(b) ? t.grad_slot(b) : nullptr);
              });
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  return push(ops::matmul(value(a), value(b)), wants(a) || wants(b),
              [a, b](Tape& t, NodeId self) {
                ops::matmul_backward(t.value(a), t.value(b), t.out_grad(self),
                                     t.wants(a) ? t.grad_slot(a) : nullptr,
                                     t.wants(b) ? t.grad_slot(b) : nullptr);
              });
}

NodeId Tape::axis_scale(NodeId x, NodeId s, int axis) {
  return push(ops::axis_scale(value(x), value(s), axis), wants(x) || wants(s),
              [x, s, axis](Tape& t, NodeId self) {
                ops::axis_scale_backward(t.value(x), t.value(s), axis, t.out_grad(self),
                                         t.wants(x) ? t.grad_slot(x) : nullptr,
                                         t.wants(s) ? t.grad_slot(s) : nullptr);
              });
}

NodeId Tape::outer_sum(NodeId a, NodeId b) {
  return push(ops::outer_sum(value(a), value(b)), wants(a) || wants(b),
              [a, b](Tape& t, NodeId self) {
                ops::outer_sum_backward(t.out_grad(self), t.wants(a) ? t.grad_slot(a) : nullptr,
                                        t.wants(b) ? t.grad_slot(b) : nullptr);
              });
}

NodeId Tape::concat_cols(const std::vector<NodeId>& parts) {
  std::vector<const Tensor*> vals;
  bool needs = false;
  for (NodeId p : parts) {
    vals.push_back(&value(p));
    needs = needs || wants(p);
  }
  return push(ops::concat_cols(vals), needs, [parts](Tape& t, NodeId self) {
    const Tensor& g = t.out_grad(self);
    const int v = g.dim(0);
    const int total = g.dim(1);
    int off = 0;
    for (NodeId p : parts) {
      const int d = t.value(p).dim(1);
      if (t.wants(p)) {
        Tensor* slot = t.grad_slot(p);
        for (int i = 0; i < v; ++i) {
          const double* src = g.data() + static_cast<std::size_t>(i) * total + off;
          double* dst = slot->data() + static_cast<std::size_t>(i) * d;
          for (int j = 0; j < d; ++j) dst[j] += src[j];
        }
      }
      off += d;
    }
  });
}

NodeId Tape::stack_rows(const std::vector<NodeId>& rows) {
  std::vector<const Tensor*> vals;
  bool needs = false;
  for (NodeId r : rows) {
    vals.push_back(&value(r));
    needs = needs || wants(r);
  }
  return push(ops::stack_rows(vals), needs, [rows](Tape& t, NodeId self) {
    const Tensor& g = t.out_grad(self);
    const int n = g.dim(1);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!t.wants(rows[r])) continue;
      Tensor* slot = t.grad_slot(rows[r]);
      const double* src = g.data() + r * static_cast<std::size_t>(n);
      for (int j = 0; j < n; ++j) (*slot)[static_cast<std::size_t>(j)] += src[j];
    }
  });
}

NodeId Tape::avg_pool(NodeId x, int grid) {
  return push(ops::avg_pool(value(x), grid), wants(x), [x, grid](Tape& t, NodeId self) {
    ops::avg_pool_backward(t.value(x), grid, t.out_grad(self),
                           t.wants(x) ? t.grad_slot(x) : nullptr);
  });
}

NodeId Tape::reshape(NodeId x, std::vector<int> shape) {
  return push(ops::reshape(value(x), std::move(shape)), wants(x), [x](Tape& t, NodeId self) {
    t.accum(x, ops::reshape(t.out_grad(self), t.value(x).shape()));
  });
}

// ---- reductions -------------------------------------------------------------

NodeId Tape::mean_all(NodeId x) {
  return push(ops::mean_all(value(x)), wants(x), [x](Tape& t, NodeId self) {
    const Tensor& xv = t.value(x);
    const double g = t.out_grad(self)[0] / static_cast<double>(xv.numel());
    t.accum(x, Tensor::full(xv.shape(), g));
  });
}

NodeId Tape::sum_all(NodeId x) {
  return push(ops::sum_all(value(x)), wants(x), [x](Tape& t, NodeId self) {
    t.accum(x, Tensor::full(t.value(x).shape(), t.out_grad(self)[0]));
  });
}

NodeId Tape::mean_axis(NodeId x, int axis) {
  return push(ops::mean_axis(value(x), axis), wants(x), [x, axis](Tape& t, NodeId self) {
    ops::mean_axis_backward(t.value(x), axis, t.out_grad(self),
                            t.wants(x) ? t.grad_slot(x) : nullptr);
  });
}

NodeId Tape::softmax_axis(NodeId x, int axis) {
  return push(ops::softmax_axis(value(x), axis), wants(x), [x, axis](Tape& t, NodeId self) {
    ops::softmax_axis_backward(t.value(self), axis, t.out_grad(self),
                               t.wants(x) ? t.grad_slot(x) : nullptr);
  });
}

}  // namespace rmat
