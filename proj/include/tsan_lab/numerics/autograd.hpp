// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The tsan-lab Authors
 *
 * @file   autograd.hpp
 * @brief  Reverse-mode differentiation over coarse tensor operations.
 *
 * Every operation records its inputs and a closure that maps the output
 * gradient onto input gradients. Leaves created from a mutable Parameter
 * forward their gradient into Parameter::grad, where it accumulates until
 * the caller zeroes it. Leaves created from a const Parameter, and all
 * constants, are cut out of the backward pass.
 */
#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tsan_lab/numerics/tensor.hpp"

namespace tsan_lab {

struct Node {
  Tensor value;
  Tensor grad;
  bool has_grad = false;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backprop;
  Tensor* sink = nullptr;

  /// Gradient buffer, zero-initialized on first touch.
  Tensor& grad_buffer() {
    if (!has_grad) {
      grad = Tensor(value.shape());
      has_grad = true;
    }
    return grad;
  }

  [[nodiscard]] Node& input(std::size_t i) const { return *inputs[i]; }
};

/// Handle to a node of the computation graph.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  [[nodiscard]] const Tensor& value() const { return node_->value; }
  [[nodiscard]] const Shape& shape() const { return node_->value.shape(); }
  [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
  [[nodiscard]] const std::shared_ptr<Node>& node() const { return node_; }
  /// Scalar value of a single-element node.
  [[nodiscard]] double item() const { return node_->value[0]; }

 private:
  std::shared_ptr<Node> node_;
};

inline Var constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  return Var(std::move(n));
}

/// Trainable leaf: gradients flow into p.grad.
inline Var param(Parameter& p) {
  auto n = std::make_shared<Node>();
  n->value = p.value;
  n->requires_grad = true;
  n->sink = &p.grad;
  return Var(std::move(n));
}

/// Frozen leaf for inference through a const model.
inline Var param(const Parameter& p) { return constant(p.value); }

namespace detail {

inline Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& in : inputs) n->requires_grad = n->requires_grad || in.requires_grad();
  if (n->requires_grad) {
    n->inputs.reserve(inputs.size());
    for (auto& in : inputs) n->inputs.push_back(in.node());
    n->backprop = std::move(backprop);
  }
  return Var(std::move(n));
}

inline void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

inline void require_rank2(const Var& a, const char* op) {
  if (a.value().rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(a.shape()));
  }
}

template <typename Fn>
Tensor map_values(const Tensor& x, Fn fn) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fn(x[i]);
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

/// (M x K) * (K x P). Rank-1 operands are treated as a single row.
inline Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() > 2 || bv.rank() > 2 || av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions disagree for " + shape_str(av.shape()) + " and " +
                     shape_str(bv.shape()));
  }
  Tensor out({av.rows(), bv.cols()});
  out.mat().noalias() = av.mat() * bv.mat();
  return detail::make_op(std::move(out), {a, b}, [](Node& self) {
    Node& na = self.input(0);
    Node& nb = self.input(1);
    if (na.requires_grad) na.grad_buffer().mat().noalias() += self.grad.mat() * nb.value.mat().transpose();
    if (nb.requires_grad) nb.grad_buffer().mat().noalias() += na.value.mat().transpose() * self.grad.mat();
  });
}

/// x (L x C) plus bias (C) broadcast over rows.
inline Var add_row_bias(const Var& x, const Var& bias) {
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (xv.rank() != 2 || bv.size() != xv.cols()) {
    throw ShapeError("add_row_bias: bias " + shape_str(bv.shape()) + " does not fit " +
                     shape_str(xv.shape()));
  }
  Tensor out = xv;
  out.mat().rowwise() += bv.mat().row(0);
  return detail::make_op(std::move(out), {x, bias}, [](Node& self) {
    Node& nx = self.input(0);
    Node& nb = self.input(1);
    if (nx.requires_grad) nx.grad_buffer().mat() += self.grad.mat();
    if (nb.requires_grad) nb.grad_buffer().mat().row(0) += self.grad.mat().colwise().sum();
  });
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "add");
  Tensor out = a.value();
  out.mat() += b.value().mat();
  return detail::make_op(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t i = 0; i < 2; ++i) {
      Node& in = self.input(i);
      if (in.requires_grad) in.grad_buffer().mat() += self.grad.mat();
    }
  });
}

inline Var mul(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor out = a.value();
  out.mat().array() *= b.value().mat().array();
  return detail::make_op(std::move(out), {a, b}, [](Node& self) {
    Node& na = self.input(0);
    Node& nb = self.input(1);
    if (na.requires_grad) na.grad_buffer().mat().array() += self.grad.mat().array() * nb.value.mat().array();
    if (nb.requires_grad) nb.grad_buffer().mat().array() += self.grad.mat().array() * na.value.mat().array();
  });
}

inline Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  out.mat() *= factor;
  return detail::make_op(std::move(out), {a}, [factor](Node& self) {
    self.input(0).grad_buffer().mat() += factor * self.grad.mat();
  });
}

inline Var sigmoid(const Var& a) {
  Tensor out = detail::map_values(a.value(), detail::sigmoid);
  return detail::make_op(std::move(out), {a}, [](Node& self) {
    const auto y = self.value.mat().array();
    self.input(0).grad_buffer().mat().array() += self.grad.mat().array() * y * (1.0 - y);
  });
}

inline Var tanh(const Var& a) {
  Tensor out = detail::map_values(a.value(), [](double v) { return std::tanh(v); });
  return detail::make_op(std::move(out), {a}, [](Node& self) {
    const auto y = self.value.mat().array();
    self.input(0).grad_buffer().mat().array() += self.grad.mat().array() * (1.0 - y * y);
  });
}

enum class Elementwise { add, mul, sigmoid, tanh, scale };

/// Dispatches to the named elementwise operation. `factor` is used by `scale` only.
inline Var elementwise(Elementwise kind, std::span<const Var> operands, double factor = 1.0) {
  const std::size_t arity = (kind == Elementwise::add || kind == Elementwise::mul) ? 2 : 1;
  if (operands.size() != arity) {
    throw ShapeError("elementwise: expected " + std::to_string(arity) + " operands, got " +
                     std::to_string(operands.size()));
  }
  switch (kind) {
    case Elementwise::add:
      return add(operands[0], operands[1]);
    case Elementwise::mul:
      return mul(operands[0], operands[1]);
    case Elementwise::sigmoid:
      return sigmoid(operands[0]);
    case Elementwise::tanh:
      return tanh(operands[0]);
    case Elementwise::scale:
      return scale(operands[0], factor);
  }
  throw ShapeError("elementwise: unknown kind");
}

// ---------------------------------------------------------------------------
// Structural
// ---------------------------------------------------------------------------

inline Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return detail::make_op(std::move(out), {a}, [](Node& self) {
    Tensor& g = self.input(0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

/// Column-wise concatenation of L x D_i parts, in list order.
inline Var concat_last_axis(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_last_axis: empty part list");
  if (parts.size() == 1) return parts.front();
  const std::size_t rows = parts.front().value().rows();
  std::size_t width = 0;
  for (const auto& p : parts) {
    detail::require_rank2(p, "concat_last_axis");
    if (p.value().rows() != rows) {
      throw ShapeError("concat_last_axis: leading dimension " + std::to_string(p.value().rows()) +
                       " differs from " + std::to_string(rows));
    }
    width += p.value().cols();
  }
  Tensor out({rows, width});
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto w = static_cast<Eigen::Index>(p.value().cols());
    out.mat().middleCols(static_cast<Eigen::Index>(off), w) = p.value().mat();
    offsets.push_back(off);
    off += p.value().cols();
  }
  return detail::make_op(std::move(out), parts, [offsets](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node& in = self.input(i);
      if (!in.requires_grad) continue;
      const auto w = static_cast<Eigen::Index>(in.value.cols());
      in.grad_buffer().mat() += self.grad.mat().middleCols(static_cast<Eigen::Index>(offsets[i]), w);
    }
  });
}

/// Row order reversed.
inline Var reverse_time(const Var& x) {
  detail::require_rank2(x, "reverse_time");
  Tensor out = x.value();
  out.mat() = x.value().mat().colwise().reverse();
  return detail::make_op(std::move(out), {x}, [](Node& self) {
    self.input(0).grad_buffer().mat() += self.grad.mat().colwise().reverse();
  });
}

/// Column means of an L x D matrix, shape {D}.
inline Var mean_over_time(const Var& x) {
  detail::require_rank2(x, "mean_over_time");
  const std::size_t length = x.value().rows();
  Tensor out({x.value().cols()});
  out.mat() = x.value().mat().colwise().mean();
  return detail::make_op(std::move(out), {x}, [length](Node& self) {
    self.input(0).grad_buffer().mat().rowwise() += self.grad.mat().row(0) / static_cast<double>(length);
  });
}

inline Var sum(const Var& x) {
  Tensor out = Tensor::scalar(x.value().mat().sum());
  return detail::make_op(std::move(out), {x}, [](Node& self) {
    self.input(0).grad_buffer().mat().array() += self.grad[0];
  });
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

/// Row-wise log-softmax, stabilized by subtracting each row's maximum.
inline Var log_softmax_rows(const Var& logits) {
  detail::require_rank2(logits, "log_softmax_rows");
  Tensor out = logits.value();
  auto m = out.mat();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    const double lse = mx + std::log((m.row(r).array() - mx).exp().sum());
    m.row(r).array() -= lse;
  }
  return detail::make_op(std::move(out), {logits}, [](Node& self) {
    const auto g = self.grad.mat();
    const RowMatrix p = self.value.mat().array().exp();
    self.input(0).grad_buffer().mat() += g - (p.array().colwise() * g.rowwise().sum().array()).matrix();
  });
}

/// Mean over rows of -log_probs[t, labels[t]].
inline Var nll_loss(const Var& log_probs, std::span<const int> labels) {
  detail::require_rank2(log_probs, "nll_loss");
  const Tensor& lp = log_probs.value();
  if (labels.size() != lp.rows()) {
    throw ShapeError("nll_loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(lp.rows()) + " rows");
  }
  const auto classes = static_cast<int>(lp.cols());
  double total = 0.0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] < 0 || labels[t] >= classes) {
      throw IndexError("nll_loss: label " + std::to_string(labels[t]) + " at t=" + std::to_string(t) +
                       " outside [0, " + std::to_string(classes) + ")");
    }
    total -= lp.at(t, static_cast<std::size_t>(labels[t]));
  }
  const auto n = static_cast<double>(labels.size());
  std::vector<int> kept(labels.begin(), labels.end());
  return detail::make_op(Tensor::scalar(total / n), {log_probs}, [kept = std::move(kept), n](Node& self) {
    Tensor& g = self.input(0).grad_buffer();
    const double d = self.grad[0] / n;
    for (std::size_t t = 0; t < kept.size(); ++t) g.at(t, static_cast<std::size_t>(kept[t])) -= d;
  });
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

/// Populates gradients of every Parameter reachable from `loss`. Parameter
/// gradients accumulate across calls; intermediate gradients are reset.
inline void backward(const Var& loss) {
  if (loss.value().size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + shape_str(loss.shape()));
  }
  Node* root = loss.node().get();
  if (!root->requires_grad) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) n->has_grad = false;
  root->grad_buffer()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->has_grad) continue;
    if (n->backprop) n->backprop(*n);
    if (n->sink != nullptr) n->sink->mat() += n->grad.mat();
  }
}

}  // namespace tsan_lab
