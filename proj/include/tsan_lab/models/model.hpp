// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The tsan-lab Authors
 *
 * @file   model.hpp
 * @brief  Backbones (Conv1D, Conv1D ensemble, stacked BiLSTM, TSAN) and
 *         the per-second step classifier.
 *
 * TSAN runs three same-length convolutions (K = 5, 25, 39) in parallel with a
 * bidirectional LSTM over the input features, concatenates the four outputs
 * and feeds them to a second bidirectional LSTM. With H hidden units per
 * direction the concatenation is 3H + 2H wide and the backbone emits 2H.
 */
#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <type_traits>
#include <unordered_set>
#include <vector>

#include "tsan_lab/layers/layers.hpp"

namespace tsan_lab {

enum class ArchKind { conv1d, conv_ensemble, lstm, tsan };

inline std::string to_string(ArchKind kind) {
  switch (kind) {
    case ArchKind::conv1d:
      return "conv1d";
    case ArchKind::conv_ensemble:
      return "conv_ensemble";
    case ArchKind::lstm:
      return "lstm";
    case ArchKind::tsan:
      return "tsan";
  }
  return "?";
}

inline ArchKind parse_arch(const std::string& s) {
  if (s == "conv1d") return ArchKind::conv1d;
  if (s == "conv_ensemble") return ArchKind::conv_ensemble;
  if (s == "lstm") return ArchKind::lstm;
  if (s == "tsan") return ArchKind::tsan;
  throw ConfigError("unknown architecture '" + s + "' (expected conv1d, conv_ensemble, lstm or tsan)");
}

inline constexpr std::size_t kNumSteps = 7;

struct ModelConfig {
  ArchKind kind = ArchKind::tsan;
  std::size_t input_dim = 64;
  std::size_t hidden = 128;
  std::vector<std::size_t> kernel_sizes{5, 25, 39};
  std::size_t lstm_layers = 1;
  std::size_t num_classes = kNumSteps;
  double dropout_rate = 0.5;

  void validate() const {
    if (input_dim == 0 || hidden == 0 || num_classes == 0) {
      throw ConfigError("model input_dim, hidden and num_classes must be positive");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0, 1)");
    for (auto k : kernel_sizes) {
      if (k % 2 == 0) throw ConfigError("kernel sizes must be odd, got " + std::to_string(k));
    }
    switch (kind) {
      case ArchKind::conv1d:
        if (kernel_sizes.size() != 1) throw ConfigError("conv1d uses exactly one kernel size");
        break;
      case ArchKind::conv_ensemble:
        if (kernel_sizes.empty()) throw ConfigError("conv_ensemble needs at least one kernel size");
        break;
      case ArchKind::tsan:
        if (kernel_sizes.size() != 3) throw ConfigError("tsan uses exactly three kernel sizes");
        break;
      case ArchKind::lstm:
        if (lstm_layers < 1 || lstm_layers > 2) throw ConfigError("lstm_layers must be 1 or 2");
        break;
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Width of the per-second representation the backbone emits.
inline std::size_t rep_width(const ModelConfig& c) {
  switch (c.kind) {
    case ArchKind::conv1d:
      return c.hidden;
    case ArchKind::conv_ensemble:
      return c.kernel_sizes.size() * c.hidden;
    case ArchKind::lstm:
    case ArchKind::tsan:
      return 2 * c.hidden;
  }
  return 0;
}

/// Width of the TSAN branch concatenation (3 convolutions + first BiLSTM).
inline std::size_t tsan_concat_width(const ModelConfig& c) { return c.kernel_sizes.size() * c.hidden + 2 * c.hidden; }

struct Backbone {
  ModelConfig config;
  std::vector<Conv1dParams> convs;
  /// lstm kind: the stack, bottom first. tsan kind: {branch, fusion}.
  std::vector<BiLstmParams> lstms;

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (auto& c : convs) collect(c, out);
    for (auto& l : lstms) collect(l, out);
    return out;
  }
  std::vector<const Parameter*> parameters() const {
    auto ps = const_cast<Backbone*>(this)->parameters();
    return {ps.begin(), ps.end()};
  }
};

struct StepModel {
  Backbone backbone;
  DenseParams head;

  [[nodiscard]] const ModelConfig& config() const { return backbone.config; }

  std::vector<Parameter*> parameters() {
    auto out = backbone.parameters();
    collect(head, out);
    return out;
  }
  std::vector<const Parameter*> parameters() const {
    auto ps = const_cast<StepModel*>(this)->parameters();
    return {ps.begin(), ps.end()};
  }
};

inline void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

/// Layers are seeded from independent streams of `seed`, so a backbone built
/// from the same seed is identical whatever head is attached later.
inline Backbone build_backbone(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Backbone b{config, {}, {}};
  const std::size_t n = config.input_dim;
  const std::size_t h = config.hidden;
  auto add_convs = [&] {
    for (std::size_t i = 0; i < config.kernel_sizes.size(); ++i) {
      const auto k = config.kernel_sizes[i];
      b.convs.push_back(init_conv1d("conv" + std::to_string(i) + "_k" + std::to_string(k), n, h, k,
                                    derive_seed(seed, 100 + i)));
    }
  };
  switch (config.kind) {
    case ArchKind::conv1d:
    case ArchKind::conv_ensemble:
      add_convs();
      break;
    case ArchKind::lstm:
      for (std::size_t l = 0; l < config.lstm_layers; ++l) {
        b.lstms.push_back(init_bilstm("bilstm" + std::to_string(l + 1), l == 0 ? n : 2 * h, h, derive_seed(seed, 200 + l)));
      }
      break;
    case ArchKind::tsan:
      add_convs();
      b.lstms.push_back(init_bilstm("bilstm1", n, h, derive_seed(seed, 200)));
      b.lstms.push_back(init_bilstm("bilstm2", tsan_concat_width(config), h, derive_seed(seed, 201)));
      break;
  }
  return b;
}

inline DenseParams build_head(const ModelConfig& config, std::uint64_t seed, const std::string& name = "head") {
  return init_dense(name, rep_width(config), config.num_classes, derive_seed(seed, 300));
}

inline StepModel build_model(const ModelConfig& config, std::uint64_t seed) {
  StepModel m{build_backbone(config, seed), build_head(config, seed)};
  std::unordered_set<std::string> names;
  for (const Parameter* p : std::as_const(m).parameters()) {
    if (!names.insert(p->name).second) throw ConfigError("duplicate parameter name " + p->name);
  }
  return m;
}

/**
 * Per-second representation, L x rep_width. Dropout is applied to the input
 * matrix, to the TSAN branch concatenation, and between stacked LSTMs, and
 * only when `training` is set.
 */
template <typename B>
  requires std::same_as<std::remove_const_t<B>, Backbone>
Var backbone_forward(B& b, const Var& x, bool training, Rng& rng) {
  const ModelConfig& c = b.config;
  if (x.value().rank() != 2 || x.value().cols() != c.input_dim) {
    throw ShapeError("backbone_forward: input " + shape_str(x.shape()) + " does not have width " +
                     std::to_string(c.input_dim));
  }
  const Var in = dropout(x, c.dropout_rate, rng, training);
  switch (c.kind) {
    case ArchKind::conv1d:
    case ArchKind::conv_ensemble: {
      std::vector<Var> branches;
      for (auto& conv : b.convs) branches.push_back(conv1d_same(in, conv));
      return concat_last_axis(branches);
    }
    case ArchKind::lstm: {
      Var h = in;
      for (std::size_t l = 0; l < b.lstms.size(); ++l) {
        if (l > 0) h = dropout(h, c.dropout_rate, rng, training);
        h = bilstm_forward(h, b.lstms[l]);
      }
      return h;
    }
    case ArchKind::tsan: {
      std::vector<Var> branches;
      for (auto& conv : b.convs) branches.push_back(conv1d_same(in, conv));
      branches.push_back(bilstm_forward(in, b.lstms[0]));
      const Var fused = dropout(concat_last_axis(branches), c.dropout_rate, rng, training);
      return bilstm_forward(fused, b.lstms[1]);
    }
  }
  throw ConfigError("unknown architecture");
}

template <typename B>
  requires std::same_as<std::remove_const_t<B>, Backbone>
Var backbone_forward(B& b, const Tensor& x, bool training, Rng& rng) {
  return backbone_forward(b, constant(x), training, rng);
}

/// L x num_classes log-probabilities.
template <typename M>
  requires std::same_as<std::remove_const_t<M>, StepModel>
Var step_log_probs(M& m, const Tensor& x, bool training, Rng& rng) {
  return log_softmax_rows(dense_forward(backbone_forward(m.backbone, x, training, rng), m.head));
}

/// Row-wise argmax; ties resolve to the lowest class index.
inline std::vector<int> argmax_rows(const Tensor& scores) {
  std::vector<int> out(scores.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.cols(); ++c) {
      if (scores.at(r, c) > scores.at(r, best)) best = c;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

inline std::vector<int> predict_steps(const StepModel& m, const Tensor& x) {
  Rng unused(0);
  return argmax_rows(step_log_probs(m, x, false, unused).value());
}

}  // namespace tsan_lab
