// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The tsan-lab Authors
 *
 * @file   metrics.hpp
 * @brief  Per-second accuracy, confusion matrices and test-set evaluation.
 */
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tsan_lab/data/sequence.hpp"
#include "tsan_lab/models/model.hpp"

namespace tsan_lab {

/// Fraction of positions where prediction and label agree.
inline double accuracy(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) {
    throw ShapeError("accuracy: " + std::to_string(preds.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw ShapeError("accuracy: empty sequence");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += preds[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

/// Rows are true steps, columns predicted steps.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumSteps>, kNumSteps> counts{};

  [[nodiscard]] std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto& row : counts)
      for (auto c : row) t += c;
    return t;
  }
  [[nodiscard]] std::uint64_t trace() const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < kNumSteps; ++i) t += counts[i][i];
    return t;
  }
  [[nodiscard]] double accuracy() const {
    const auto n = total();
    return n == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(n);
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    for (std::size_t i = 0; i < kNumSteps; ++i)
      for (std::size_t j = 0; j < kNumSteps; ++j) counts[i][j] += o.counts[i][j];
    return *this;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) throw ShapeError("confusion: prediction and label lengths differ");
  ConfusionMatrix m;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const int y = labels[t];
    const int p = preds[t];
    if (y < 0 || y >= static_cast<int>(kNumSteps) || p < 0 || p >= static_cast<int>(kNumSteps)) {
      throw IndexError("confusion: class out of range at t=" + std::to_string(t));
    }
    ++m.counts[static_cast<std::size_t>(y)][static_cast<std::size_t>(p)];
  }
  return m;
}

struct MetricsReport {
  std::vector<std::string> video_ids;
  std::vector<double> video_accuracy;
  double pooled_accuracy = 0.0;
  ConfusionMatrix confusion;
};

/// Pooled per-second accuracy over all videos (inference mode, no augmentation).
inline MetricsReport evaluate(const StepModel& model, const Dataset& data) {
  MetricsReport r;
  for (const auto& seq : data) {
    if (!seq.labels) throw FormatError(seq.id + ": evaluation needs labels");
    if (seq.width() != model.config().input_dim) {
      throw ShapeError(seq.id + ": feature width " + std::to_string(seq.width()) + " differs from model input " +
                       std::to_string(model.config().input_dim));
    }
    const auto preds = predict_steps(model, seq.features);
    r.video_ids.push_back(seq.id);
    r.video_accuracy.push_back(accuracy(preds, *seq.labels));
    r.confusion += confusion(preds, *seq.labels);
  }
  r.pooled_accuracy = r.confusion.accuracy();
  return r;
}

}  // namespace tsan_lab
