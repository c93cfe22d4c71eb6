// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The tsan-lab Authors
 *
 * @file   layers.hpp
 * @brief  Temporal convolution, LSTM, dense projection and dropout.
 *
 * Every layer consumes an L x C matrix (one row per second) and produces an
 * L x C' matrix. Parameters are named "<layer>.<field>"; the checkpoint
 * format depends on these names.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "tsan_lab/numerics/autograd.hpp"
#include "tsan_lab/rng.hpp"

namespace tsan_lab {

// ---------------------------------------------------------------------------
// Parameter blocks
// ---------------------------------------------------------------------------

/// weight: C_out x C_in x K, bias: C_out. K is odd.
struct Conv1dParams {
  Parameter weight;
  Parameter bias;

  [[nodiscard]] std::size_t out_channels() const { return weight.value.dim(0); }
  [[nodiscard]] std::size_t in_channels() const { return weight.value.dim(1); }
  [[nodiscard]] std::size_t kernel_size() const { return weight.value.dim(2); }
};

/**
 * Standard (no peephole) LSTM cell parameters. The 4H rows of w_input,
 * w_hidden and bias are stacked in gate order input, forget, cell, output.
 */
struct LstmParams {
  Parameter w_input;   // 4H x C_in
  Parameter w_hidden;  // 4H x H
  Parameter bias;      // 4H

  [[nodiscard]] std::size_t hidden() const { return w_hidden.value.dim(1); }
  [[nodiscard]] std::size_t in_channels() const { return w_input.value.dim(1); }
};

enum class LstmGate : std::size_t { input = 0, forget = 1, cell = 2, output = 3 };

struct BiLstmParams {
  LstmParams forward;
  LstmParams backward;

  [[nodiscard]] std::size_t hidden() const { return forward.hidden(); }
  [[nodiscard]] std::size_t in_channels() const { return forward.in_channels(); }
};

/// weight: D_in x C, bias: C.
struct DenseParams {
  Parameter weight;
  Parameter bias;

  [[nodiscard]] std::size_t in_width() const { return weight.value.dim(0); }
  [[nodiscard]] std::size_t out_width() const { return weight.value.dim(1); }
};

enum class Direction { forward, backward };

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

inline double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

inline Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = glorot_bound(fan_in, fan_out);
  for (auto& v : t.data()) v = (2.0 * uniform01(rng) - 1.0) * bound;
  return t;
}

inline Conv1dParams init_conv1d(const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
                                std::uint64_t seed) {
  if (kernel % 2 == 0) throw ConfigError("conv1d kernel size must be odd, got " + std::to_string(kernel));
  Rng rng(seed);
  return {Parameter(name + ".weight", glorot_uniform({out, in, kernel}, in * kernel, out * kernel, rng)),
          Parameter(name + ".bias", Tensor({out}))};
}

/// Glorot-uniform weights, zero bias except a forget-gate bias of 1.
inline LstmParams init_lstm(const std::string& name, std::size_t in, std::size_t hidden, std::uint64_t seed) {
  Rng rng(seed);
  LstmParams p{Parameter(name + ".w_input", glorot_uniform({4 * hidden, in}, in, 4 * hidden, rng)),
               Parameter(name + ".w_hidden", glorot_uniform({4 * hidden, hidden}, hidden, 4 * hidden, rng)),
               Parameter(name + ".bias", Tensor({4 * hidden}))};
  const std::size_t forget = static_cast<std::size_t>(LstmGate::forget) * hidden;
  for (std::size_t j = 0; j < hidden; ++j) p.bias.value[forget + j] = 1.0;
  return p;
}

inline BiLstmParams init_bilstm(const std::string& name, std::size_t in, std::size_t hidden, std::uint64_t seed) {
  return {init_lstm(name + ".fwd", in, hidden, derive_seed(seed, 0)),
          init_lstm(name + ".bwd", in, hidden, derive_seed(seed, 1))};
}

inline DenseParams init_dense(const std::string& name, std::size_t in, std::size_t out, std::uint64_t seed) {
  Rng rng(seed);
  return {Parameter(name + ".weight", glorot_uniform({in, out}, in, out, rng)),
          Parameter(name + ".bias", Tensor({out}))};
}

inline void collect(Conv1dParams& p, std::vector<Parameter*>& out) {
  out.push_back(&p.weight);
  out.push_back(&p.bias);
}
inline void collect(LstmParams& p, std::vector<Parameter*>& out) {
  out.push_back(&p.w_input);
  out.push_back(&p.w_hidden);
  out.push_back(&p.bias);
}
inline void collect(BiLstmParams& p, std::vector<Parameter*>& out) {
  collect(p.forward, out);
  collect(p.backward, out);
}
inline void collect(DenseParams& p, std::vector<Parameter*>& out) {
  out.push_back(&p.weight);
  out.push_back(&p.bias);
}

// ---------------------------------------------------------------------------
// Differentiable layer operations on graph values
// ---------------------------------------------------------------------------

/**
 * Same-length temporal convolution with (K-1)/2 zeros of padding on each side:
 * out[t,o] = bias[o] + sum_{k,c} weight[o,c,k] * x_pad[t+k,c].
 */
inline Var conv1d_same(const Var& x, const Var& weight, const Var& bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  if (xv.rank() != 2 || wv.rank() != 3 || xv.cols() != wv.dim(1) || bias.value().size() != wv.dim(0)) {
    throw ShapeError("conv1d_same: input " + shape_str(xv.shape()) + " does not match weight " +
                     shape_str(wv.shape()));
  }
  const auto length = static_cast<Eigen::Index>(xv.rows());
  const auto c_in = static_cast<Eigen::Index>(wv.dim(1));
  const auto c_out = static_cast<Eigen::Index>(wv.dim(0));
  const auto kernel = static_cast<Eigen::Index>(wv.dim(2));
  if (kernel % 2 == 0) throw ShapeError("conv1d_same: kernel size must be odd");
  const Eigen::Index pad = (kernel - 1) / 2;

  // Tap k of the kernel as a contiguous C_out x C_in matrix.
  auto tap = [c_out, c_in, kernel](const Tensor& w, Eigen::Index k) {
    RowMatrix m(c_out, c_in);
    for (Eigen::Index o = 0; o < c_out; ++o)
      for (Eigen::Index c = 0; c < c_in; ++c) m(o, c) = w[static_cast<std::size_t>((o * c_in + c) * kernel + k)];
    return m;
  };

  RowMatrix padded = RowMatrix::Zero(length + 2 * pad, c_in);
  padded.middleRows(pad, length) = xv.mat();
  Tensor out({xv.rows(), wv.dim(0)});
  auto om = out.mat();
  om.rowwise() = bias.value().mat().row(0);
  for (Eigen::Index k = 0; k < kernel; ++k) om.noalias() += padded.middleRows(k, length) * tap(wv, k).transpose();

  return detail::make_op(std::move(out), {x, weight, bias},
                         [length, c_in, c_out, kernel, pad, tap](Node& self) {
    Node& nx = self.input(0);
    Node& nw = self.input(1);
    Node& nb = self.input(2);
    const auto g = self.grad.mat();
    if (nb.requires_grad) nb.grad_buffer().mat().row(0) += g.colwise().sum();
    RowMatrix padded = RowMatrix::Zero(length + 2 * pad, c_in);
    padded.middleRows(pad, length) = nx.value.mat();
    RowMatrix d_padded;
    if (nx.requires_grad) d_padded = RowMatrix::Zero(length + 2 * pad, c_in);
    for (Eigen::Index k = 0; k < kernel; ++k) {
      if (nw.requires_grad) {
        const RowMatrix dw = g.transpose() * padded.middleRows(k, length);
        Tensor& wg = nw.grad_buffer();
        for (Eigen::Index o = 0; o < c_out; ++o)
          for (Eigen::Index c = 0; c < c_in; ++c) wg[static_cast<std::size_t>((o * c_in + c) * kernel + k)] += dw(o, c);
      }
      if (nx.requires_grad) d_padded.middleRows(k, length).noalias() += g * tap(nw.value, k);
    }
    if (nx.requires_grad) nx.grad_buffer().mat() += d_padded.middleRows(pad, length);
  });
}

/**
 * One LSTM direction over the whole sequence with h0 = c0 = 0. For each
 * step in traversal order:
 *   gates = W_in x_t + W_h h_{t-1} + b
 *   c_t = f * c_{t-1} + i * g,  h_t = o * tanh(c_t)
 * with i, f, o sigmoid and g tanh. Row t of the output is the hidden state
 * at input time t in both directions.
 */
inline Var lstm_sequence(const Var& x, const Var& w_input, const Var& w_hidden, const Var& bias, Direction dir) {
  const Tensor& xv = x.value();
  const Tensor& wi = w_input.value();
  const Tensor& wh = w_hidden.value();
  const std::size_t hidden = wh.rank() == 2 ? wh.dim(1) : 0;
  if (xv.rank() != 2 || wi.rank() != 2 || hidden == 0 || wh.dim(0) != 4 * hidden || wi.dim(0) != 4 * hidden ||
      xv.cols() != wi.dim(1) || bias.value().size() != 4 * hidden) {
    throw ShapeError("lstm: input " + shape_str(xv.shape()) + " does not match w_input " + shape_str(wi.shape()) +
                     " / w_hidden " + shape_str(wh.shape()));
  }
  const auto length = static_cast<Eigen::Index>(xv.rows());
  const auto h = static_cast<Eigen::Index>(hidden);

  struct Cache {
    RowMatrix gates;   // activated i, f, g, o per time row
    RowMatrix cells;   // c_t
    RowMatrix tanh_c;  // tanh(c_t)
  };
  auto cache = std::make_shared<Cache>();
  cache->gates.resize(length, 4 * h);
  cache->cells.resize(length, h);
  cache->tanh_c.resize(length, h);

  auto time_of = [length, dir](Eigen::Index step) { return dir == Direction::forward ? step : length - 1 - step; };

  Tensor out({xv.rows(), hidden});
  auto om = out.mat();
  RowMatrix pre = xv.mat() * wi.mat().transpose();
  pre.rowwise() += bias.value().mat().row(0);
  const RowMatrix wh_t = wh.mat().transpose();
  Eigen::RowVectorXd h_prev = Eigen::RowVectorXd::Zero(h);
  Eigen::RowVectorXd c_prev = Eigen::RowVectorXd::Zero(h);
  Eigen::RowVectorXd z(4 * h);
  for (Eigen::Index s = 0; s < length; ++s) {
    const Eigen::Index t = time_of(s);
    z.noalias() = pre.row(t) + h_prev * wh_t;
    auto gates = cache->gates.row(t);
    for (Eigen::Index j = 0; j < 4 * h; ++j) {
      gates(j) = (j >= 2 * h && j < 3 * h) ? std::tanh(z(j)) : detail::sigmoid(z(j));
    }
    c_prev = gates.segment(h, h).cwiseProduct(c_prev) + gates.segment(0, h).cwiseProduct(gates.segment(2 * h, h));
    cache->cells.row(t) = c_prev;
    cache->tanh_c.row(t) = c_prev.array().tanh();
    h_prev = gates.segment(3 * h, h).cwiseProduct(cache->tanh_c.row(t));
    om.row(t) = h_prev;
  }

  return detail::make_op(std::move(out), {x, w_input, w_hidden, bias}, [cache, length, h, time_of](Node& self) {
    Node& nx = self.input(0);
    Node& nwi = self.input(1);
    Node& nwh = self.input(2);
    Node& nb = self.input(3);
    const auto d_out = self.grad.mat();
    const auto hs = self.value.mat();
    const auto wh = nwh.value.mat();

    RowMatrix d_pre(length, 4 * h);
    RowMatrix h_prev_rows = RowMatrix::Zero(length, h);
    Eigen::RowVectorXd dh_next = Eigen::RowVectorXd::Zero(h);
    Eigen::RowVectorXd dc_next = Eigen::RowVectorXd::Zero(h);
    for (Eigen::Index s = length - 1; s >= 0; --s) {
      const Eigen::Index t = time_of(s);
      const auto gates = cache->gates.row(t);
      const auto i = gates.segment(0, h).array();
      const auto f = gates.segment(h, h).array();
      const auto g = gates.segment(2 * h, h).array();
      const auto o = gates.segment(3 * h, h).array();
      const auto tc = cache->tanh_c.row(t).array();
      Eigen::RowVectorXd c_prev = Eigen::RowVectorXd::Zero(h);
      if (s > 0) {
        const Eigen::Index tp = time_of(s - 1);
        c_prev = cache->cells.row(tp);
        h_prev_rows.row(t) = hs.row(tp);
      }
      const Eigen::ArrayXXd dh = (d_out.row(t) + dh_next).array();
      const Eigen::ArrayXXd dc = dc_next.array() + dh * o * (1.0 - tc * tc);
      auto row = d_pre.row(t);
      row.segment(0, h) = (dc * g * i * (1.0 - i)).matrix();
      row.segment(h, h) = (dc * c_prev.array() * f * (1.0 - f)).matrix();
      row.segment(2 * h, h) = (dc * i * (1.0 - g * g)).matrix();
      row.segment(3 * h, h) = (dh * tc * o * (1.0 - o)).matrix();
      dc_next = (dc * f).matrix();
      dh_next.noalias() = row * wh;
    }
    if (nwi.requires_grad) nwi.grad_buffer().mat().noalias() += d_pre.transpose() * nx.value.mat();
    if (nwh.requires_grad) nwh.grad_buffer().mat().noalias() += d_pre.transpose() * h_prev_rows;
    if (nb.requires_grad) nb.grad_buffer().mat().row(0) += d_pre.colwise().sum();
    if (nx.requires_grad) nx.grad_buffer().mat().noalias() += d_pre * nwi.value.mat();
  });
}

/// Inverted dropout: survivors are scaled by 1/(1-rate); identity at inference.
inline Var dropout(const Var& x, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;
  Tensor mask(x.shape());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (auto& m : mask.data()) m = uniform01(rng) < rate ? 0.0 : keep_scale;
  return mul(x, constant(std::move(mask)));
}

// ---------------------------------------------------------------------------
// Parameter-bound layer forwards. `P` may be const, in which case the
// parameters enter the graph as constants.
// ---------------------------------------------------------------------------

template <typename P>
  requires std::same_as<std::remove_const_t<P>, Conv1dParams>
Var conv1d_same(const Var& x, P& p) {
  if (x.value().cols() != p.in_channels()) {
    throw ShapeError("conv1d_same: input has " + std::to_string(x.value().cols()) + " channels, layer expects " +
                     std::to_string(p.in_channels()));
  }
  return conv1d_same(x, param(p.weight), param(p.bias));
}

template <typename P>
  requires std::same_as<std::remove_const_t<P>, LstmParams>
Var lstm_forward(const Var& x, P& p, Direction dir) {
  if (x.value().cols() != p.in_channels()) {
    throw ShapeError("lstm_forward: input has " + std::to_string(x.value().cols()) + " channels, layer expects " +
                     std::to_string(p.in_channels()));
  }
  return lstm_sequence(x, param(p.w_input), param(p.w_hidden), param(p.bias), dir);
}

/// [forward-direction output | backward-direction output], L x 2H.
template <typename P>
  requires std::same_as<std::remove_const_t<P>, BiLstmParams>
Var bilstm_forward(const Var& x, P& p) {
  return concat_last_axis({lstm_forward(x, p.forward, Direction::forward),
                           lstm_forward(x, p.backward, Direction::backward)});
}

template <typename P>
  requires std::same_as<std::remove_const_t<P>, DenseParams>
Var dense_forward(const Var& x, P& p) {
  if (x.value().cols() != p.in_width()) {
    throw ShapeError("dense_forward: input width " + std::to_string(x.value().cols()) + " differs from " +
                     std::to_string(p.in_width()));
  }
  const Var rows = x.value().rank() == 1 ? reshape(x, {1, x.value().size()}) : x;
  return add_row_bias(matmul(rows, param(p.weight)), param(p.bias));
}

}  // namespace tsan_lab
