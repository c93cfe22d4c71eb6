// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The tsan-lab Authors
 *
 * @file   training.hpp
 * @brief  SGD training of step models: one video per update, relevance
 *         augmentation, and best-validation snapshot selection.
 */
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "tsan_lab/config.hpp"
#include "tsan_lab/data/sequence.hpp"
#include "tsan_lab/experiments/metrics.hpp"
#include "tsan_lab/models/model.hpp"

namespace tsan_lab {

struct TrainConfig {
  std::size_t epochs = 100;
  /// Unset means 1e-3 for convolutional kinds and 1e-2 for lstm and tsan.
  std::optional<double> lr;
  double dropout_rate = 0.5;
  double relevance_drop_prob = 0.5;
  std::uint64_t seed = 0;
  bool select_best_on_val = true;
  /// Global gradient-norm clip; 0 disables clipping.
  double clip_norm = 0.0;

  [[nodiscard]] double learning_rate(ArchKind kind) const {
    if (lr) return *lr;
    return (kind == ArchKind::conv1d || kind == ArchKind::conv_ensemble) ? 1e-3 : 1e-2;
  }

  void validate() const {
    if (lr && !(*lr >= 0.0)) throw ConfigError("lr must be non-negative");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0, 1)");
    if (!(relevance_drop_prob >= 0.0 && relevance_drop_prob < 1.0)) {
      throw ConfigError("relevance_drop_prob must be in [0, 1)");
    }
    if (clip_norm < 0.0) throw ConfigError("clip_norm must be non-negative");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_accuracy = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

struct History {
  std::vector<EpochRecord> epochs;
  /// 1-based epoch of the returned snapshot; 0 when the initial model was returned.
  std::size_t selected_epoch = 0;

  [[nodiscard]] double best_val_accuracy() const {
    double best = -1.0;
    for (const auto& e : epochs) best = std::max(best, e.val_accuracy);
    return best;
  }
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/**
 * Drops each irrelevant second independently with probability `drop_prob`.
 * Relevant seconds are always kept; labels and mask stay aligned.
 */
inline FeatureSequence relevance_augment(const FeatureSequence& seq, double drop_prob, Rng& rng) {
  if (!seq.relevance || drop_prob <= 0.0) return seq;
  std::vector<std::size_t> keep;
  keep.reserve(seq.length());
  for (std::size_t t = 0; t < seq.length(); ++t) {
    if ((*seq.relevance)[t] || uniform01(rng) >= drop_prob) keep.push_back(t);
  }
  if (keep.size() == seq.length()) return seq;
  if (keep.empty()) keep.push_back(0);  // an all-irrelevant video keeps one row
  return select_rows(seq, keep);
}

/// value -= lr * grad for every parameter, then zero the gradients.
inline void sgd_update(std::span<Parameter* const> params, double lr) {
  for (Parameter* p : params) {
    if (lr != 0.0) p->value.mat() -= lr * p->grad.mat();
    p->zero_grad();
  }
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
inline double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.mat().squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (Parameter* p : params) p->grad.mat() *= f;
  }
  return norm;
}

/// Pooled per-second accuracy over a labeled dataset; NaN when empty.
inline double dataset_accuracy(const StepModel& model, const Dataset& data) {
  if (data.empty()) return std::numeric_limits<double>::quiet_NaN();
  return evaluate(model, data).pooled_accuracy;
}

inline void check_step_dataset(const Dataset& data, std::size_t width, const char* what) {
  for (const auto& s : data) {
    s.validate();
    if (!s.labels) throw FormatError(std::string(what) + " sequence " + s.id + " has no labels");
    if (s.width() != width) {
      throw ShapeError(std::string(what) + " sequence " + s.id + " has width " + std::to_string(s.width()) +
                       ", model expects " + std::to_string(width));
    }
  }
}

/**
 * Trains `model` in place of a copy and returns the selected snapshot. Each
 * epoch shuffles the video order, and every video gives one SGD step on the
 * mean per-second NLL of its augmented sequence.
 */
inline std::pair<StepModel, History> train_model(StepModel model, const Dataset& train, const Dataset& val,
                                                 const TrainConfig& tc, const EpochCallback& on_epoch = {}) {
  tc.validate();
  if (train.empty()) throw ConfigError("training set is empty");
  check_step_dataset(train, model.config().input_dim, "training");
  check_step_dataset(val, model.config().input_dim, "validation");
  model.backbone.config.dropout_rate = tc.dropout_rate;

  const double lr = tc.learning_rate(model.config().kind);
  auto params = model.parameters();
  zero_grads(params);
  Rng rng(derive_seed(tc.seed, 0x7A));

  History history;
  StepModel best = model;
  double best_acc = -1.0;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (auto idx : order) {
      const FeatureSequence seq = relevance_augment(train[idx], tc.relevance_drop_prob, rng);
      const Var loss = nll_loss(step_log_probs(model, seq.features, true, rng), *seq.labels);
      backward(loss);
      if (tc.clip_norm > 0.0) clip_grad_norm(params, tc.clip_norm);
      sgd_update(params, lr);
      loss_sum += loss.item();
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    rec.val_accuracy = dataset_accuracy(model, val);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    history.epochs.push_back(rec);
    if (tc.select_best_on_val && !val.empty() && rec.val_accuracy > best_acc) {
      best_acc = rec.val_accuracy;
      best = model;
      history.selected_epoch = epoch;
    }
    if (on_epoch) on_epoch(rec);
  }
  if (!tc.select_best_on_val || val.empty() || tc.epochs == 0) {
    history.selected_epoch = tc.epochs;
    return {std::move(model), std::move(history)};
  }
  return {std::move(best), std::move(history)};
}

/// Random initialization, or a pretrained backbone with a fresh step head.
struct TrainInit {
  std::uint64_t seed = 0;
  std::optional<Backbone> backbone;

  static TrainInit random(std::uint64_t seed) { return {seed, std::nullopt}; }
  static TrainInit from_backbone(Backbone b, std::uint64_t seed) { return {seed, std::move(b)}; }
};

inline StepModel init_step_model(const ModelConfig& mc, const TrainInit& init) {
  StepModel model = build_model(mc, init.seed);
  if (init.backbone) {
    ModelConfig theirs = init.backbone->config;
    theirs.dropout_rate = mc.dropout_rate;
    if (!(theirs == mc)) {
      throw ConfigCompatibilityError("pretrained backbone is a " + to_string(init.backbone->config.kind) +
                                     " with hidden " + std::to_string(init.backbone->config.hidden) +
                                     ", requested " + to_string(mc.kind) + " with hidden " + std::to_string(mc.hidden));
    }
    model.backbone = *init.backbone;
    model.backbone.config = mc;
  }
  return model;
}

inline std::pair<StepModel, History> train_step_model(const Dataset& train, const Dataset& val, const ModelConfig& mc,
                                                      const TrainConfig& tc, const TrainInit& init,
                                                      const EpochCallback& on_epoch = {}) {
  return train_model(init_step_model(mc, init), train, val, tc, on_epoch);
}

}  // namespace tsan_lab
