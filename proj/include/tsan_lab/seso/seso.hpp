// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The tsan-lab Authors
 *
 * @file   seso.hpp
 * @brief  Sequence-sorting pretext task.
 *
 * A sequence is cut into nine contiguous segments which are shuffled by one
 * permutation from a fixed codebook; the model classifies which codebook
 * entry was applied. Each segment runs through the backbone on its own (fresh
 * recurrent state, no padding), is summarized by its temporal mean, and the
 * nine summaries are concatenated in shuffled order into the input of the
 * sorting head.
 */
#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tsan_lab/experiments/checkpoint.hpp"
#include "tsan_lab/experiments/run_config.hpp"
#include "tsan_lab/models/model.hpp"
#include "tsan_lab/training/training.hpp"

namespace tsan_lab {

inline constexpr std::size_t kSegments = 9;
inline constexpr std::size_t kSegmentOrderings = 362880;  // 9!

using Permutation = std::array<std::uint8_t, kSegments>;

inline Permutation identity_permutation() {
  Permutation p{};
  std::iota(p.begin(), p.end(), std::uint8_t{0});
  return p;
}

inline std::size_t hamming(const Permutation& a, const Permutation& b) {
  std::size_t d = 0;
  for (std::size_t i = 0; i < kSegments; ++i) d += a[i] != b[i] ? 1 : 0;
  return d;
}

inline bool is_permutation_of_segments(const Permutation& p) {
  std::array<bool, kSegments> seen{};
  for (auto v : p) {
    if (v >= kSegments || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

/// Codebook of segment orderings. perms[0] is the identity.
struct PermutationTable {
  std::vector<Permutation> perms;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t size() const { return perms.size(); }
  [[nodiscard]] PermutationSpec spec() const { return {perms.size(), seed}; }
};

/**
 * Greedy max-min Hamming codebook: after the identity, each entry is the best
 * of 100 random candidates by minimum Hamming distance to the entries chosen
 * so far (first candidate wins ties). Candidates already in the table are
 * never chosen.
 */
inline PermutationTable build_permutation_table(std::size_t count, std::uint64_t seed) {
  if (count == 0 || count > kSegmentOrderings) {
    throw ConfigError("permutation table size must be in [1, 9!], got " + std::to_string(count));
  }
  constexpr std::size_t kCandidates = 100;
  PermutationTable table{{identity_permutation()}, seed};
  Rng rng(seed);
  while (table.perms.size() < count) {
    std::optional<Permutation> best;
    std::size_t best_dist = 0;
    for (std::size_t c = 0; c < kCandidates || !best; ++c) {
      Permutation cand = identity_permutation();
      std::shuffle(cand.begin(), cand.end(), rng);
      std::size_t dist = kSegments;
      for (const auto& p : table.perms) dist = std::min(dist, hamming(cand, p));
      if (dist > best_dist) {
        best_dist = dist;
        best = cand;
      }
    }
    table.perms.push_back(*best);
  }
  return table;
}

inline PermutationTable build_permutation_table(const PermutationSpec& spec) {
  return build_permutation_table(spec.count, spec.seed);
}

/// Contiguous split into nine segments; the first L mod 9 get one extra row.
inline std::vector<Tensor> split_nine(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("split_nine: expected an L x N matrix");
  const std::size_t length = x.rows();
  if (length < kSegments) {
    throw ShapeError("split_nine: sequence of length " + std::to_string(length) + " is shorter than " +
                     std::to_string(kSegments) + " seconds");
  }
  const std::size_t base = length / kSegments;
  const std::size_t extra = length % kSegments;
  const std::size_t width = x.cols();
  std::vector<Tensor> out;
  std::size_t row = 0;
  for (std::size_t i = 0; i < kSegments; ++i) {
    const std::size_t len = base + (i < extra ? 1 : 0);
    const auto src = x.data().subspan(row * width, len * width);
    out.emplace_back(Shape{len, width}, std::vector<double>(src.begin(), src.end()));
    row += len;
  }
  return out;
}

struct SortingExample {
  std::vector<Tensor> segments;  // shuffled order
  std::size_t target_class = 0;
};

/// segments[i] = split_nine(x)[perm[i]] with perm = table.perms[target_class].
inline SortingExample make_sorting_example(const Tensor& x, const PermutationTable& table, std::size_t target_class) {
  if (target_class >= table.size()) throw IndexError("sorting class " + std::to_string(target_class) + " out of range");
  auto parts = split_nine(x);
  const Permutation& perm = table.perms[target_class];
  SortingExample ex;
  ex.target_class = target_class;
  for (std::size_t i = 0; i < kSegments; ++i) ex.segments.push_back(parts[perm[i]]);
  return ex;
}

/// Draws the target class uniformly from the table.
inline SortingExample make_sorting_example(const Tensor& x, const PermutationTable& table, Rng& rng) {
  const auto cls = std::uniform_int_distribution<std::size_t>(0, table.size() - 1)(rng);
  return make_sorting_example(x, table, cls);
}

/// Segments back in original order.
inline std::vector<Tensor> unshuffle(const SortingExample& ex, const PermutationTable& table) {
  const Permutation& perm = table.perms.at(ex.target_class);
  std::vector<Tensor> parts(kSegments);
  for (std::size_t i = 0; i < kSegments; ++i) parts[perm[i]] = ex.segments[i];
  return parts;
}

// ---------------------------------------------------------------------------
// Sorting model
// ---------------------------------------------------------------------------

struct SesoModel {
  Backbone backbone;
  DenseParams head;  // 9 * rep_width -> P

  std::vector<Parameter*> parameters() {
    auto out = backbone.parameters();
    collect(head, out);
    return out;
  }
};

inline DenseParams build_seso_head(const ModelConfig& mc, std::size_t permutations, std::uint64_t seed) {
  return init_dense("seso_head", kSegments * rep_width(mc), permutations, derive_seed(seed, 400));
}

/// 1 x P log-probabilities over codebook entries.
template <typename B, typename H>
  requires std::same_as<std::remove_const_t<B>, Backbone> && std::same_as<std::remove_const_t<H>, DenseParams>
Var seso_log_probs(B& backbone, H& head, const SortingExample& ex, bool training, Rng& rng) {
  if (ex.segments.size() != kSegments) throw ShapeError("sorting example must have nine segments");
  std::vector<Var> summaries;
  summaries.reserve(kSegments);
  for (const auto& seg : ex.segments) {
    summaries.push_back(reshape(mean_over_time(backbone_forward(backbone, seg, training, rng)),
                                {1, rep_width(backbone.config)}));
  }
  return log_softmax_rows(dense_forward(concat_last_axis(summaries), head));
}

struct SesoResult {
  SesoModel model;
  PermutationTable table;
  History history;  // val_accuracy is the sorting accuracy

  [[nodiscard]] Checkpoint checkpoint() const {
    Checkpoint ck{model.backbone.config, table.spec(), {}};
    append_params(ck, model.backbone.parameters());
    ck.tensors.push_back({model.head.weight.name, model.head.weight.value});
    ck.tensors.push_back({model.head.bias.name, model.head.bias.value});
    return ck;
  }
};

/// Fixed validation puzzles: `per_video` puzzles per sequence from `seed`.
inline std::vector<SortingExample> fixed_puzzles(const Dataset& data, const PermutationTable& table,
                                                 std::size_t per_video, std::uint64_t seed) {
  std::vector<SortingExample> out;
  for (std::size_t v = 0; v < data.size(); ++v) {
    if (data[v].length() < kSegments) continue;
    Rng rng(derive_seed(seed, v));
    for (std::size_t k = 0; k < per_video; ++k) out.push_back(make_sorting_example(data[v].features, table, rng));
  }
  return out;
}

/// Fraction of puzzles whose argmax class equals the target; NaN when empty.
inline double sorting_accuracy(const SesoModel& m, const std::vector<SortingExample>& puzzles) {
  if (puzzles.empty()) return std::numeric_limits<double>::quiet_NaN();
  Rng unused(0);
  std::size_t hits = 0;
  for (const auto& ex : puzzles) {
    const auto pred = argmax_rows(seso_log_probs(m.backbone, m.head, ex, false, unused).value());
    hits += static_cast<std::size_t>(pred[0]) == ex.target_class ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(puzzles.size());
}

/// Mean NLL over fixed puzzles in inference mode.
inline double sorting_loss(const SesoModel& m, const std::vector<SortingExample>& puzzles) {
  Rng unused(0);
  double total = 0.0;
  for (const auto& ex : puzzles) {
    const int target = static_cast<int>(ex.target_class);
    total += nll_loss(seso_log_probs(m.backbone, m.head, ex, false, unused), std::span<const int>(&target, 1)).item();
  }
  return puzzles.empty() ? 0.0 : total / static_cast<double>(puzzles.size());
}

/**
 * Pretrains backbone and sorting head by SGD, one freshly drawn puzzle per
 * training video per epoch. Labels are not used. Sequences shorter than nine
 * seconds are skipped with a warning. Validation accuracy is measured on
 * fixed puzzles (val_puzzles per validation video) after every epoch; the
 * final-epoch model is returned.
 */
inline SesoResult pretrain_seso(const Dataset& train, const Dataset& val, const ModelConfig& mc, const TrainConfig& tc,
                                const SesoConfig& sc, const EpochCallback& on_epoch = {}) {
  tc.validate();
  sc.validate();
  Dataset usable;
  for (const auto& s : train) {
    if (s.length() < kSegments) {
      std::cerr << "warning: skipping " << s.id << " for sequence sorting (length " << s.length() << " < 9)\n";
      continue;
    }
    if (s.width() != mc.input_dim) {
      throw ShapeError(s.id + ": feature width " + std::to_string(s.width()) + " differs from model input " +
                       std::to_string(mc.input_dim));
    }
    usable.push_back(s);
  }
  if (usable.empty()) throw ConfigError("no sequence of length >= 9 to pretrain on");

  ModelConfig config = mc;
  config.dropout_rate = tc.dropout_rate;
  SesoResult result{{build_backbone(config, tc.seed), build_seso_head(config, sc.permutations, tc.seed)},
                    build_permutation_table(sc.permutations, sc.table_seed),
                    {}};
  const auto val_puzzles = fixed_puzzles(val, result.table, sc.val_puzzles, derive_seed(tc.seed, 0x5E50));
  const double lr = sc.lr ? *sc.lr : tc.learning_rate(config.kind);
  auto params = result.model.parameters();
  zero_grads(params);
  Rng rng(derive_seed(tc.seed, 0x5E5));
  std::vector<std::size_t> order(usable.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= sc.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (auto idx : order) {
      const SortingExample ex = make_sorting_example(usable[idx].features, result.table, rng);
      const int target = static_cast<int>(ex.target_class);
      const Var loss = nll_loss(seso_log_probs(result.model.backbone, result.model.head, ex, true, rng),
                                std::span<const int>(&target, 1));
      backward(loss);
      if (tc.clip_norm > 0.0) clip_grad_norm(params, tc.clip_norm);
      sgd_update(params, lr);
      loss_sum += loss.item();
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(usable.size());
    rec.val_accuracy = sorting_accuracy(result.model, val_puzzles);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  result.history.selected_epoch = sc.epochs;
  return result;
}

/// Backbone of a sorting checkpoint with the sorting head discarded.
inline Backbone strip_to_backbone(const Checkpoint& ck) {
  bool has_head = false;
  for (const auto& t : ck.tensors) has_head = has_head || t.name.starts_with(kSesoHeadPrefix);
  if (!has_head || !ck.permutations) throw FormatError("checkpoint does not contain a sequence-sorting head");
  Checkpoint stripped{ck.config, std::nullopt, {}};
  for (const auto& t : ck.tensors) {
    if (!t.name.starts_with(kSesoHeadPrefix)) stripped.tensors.push_back(t);
  }
  return restore_backbone(stripped);
}

/// Full finetuning of a sorting-pretrained backbone with a fresh step head.
inline std::pair<StepModel, History> finetune_from_seso(const Checkpoint& seso_checkpoint, const Dataset& train,
                                                        const Dataset& val, const ModelConfig& mc,
                                                        const TrainConfig& tc, const EpochCallback& on_epoch = {}) {
  Backbone backbone = strip_to_backbone(seso_checkpoint);
  detail::check_compatible(backbone.config, mc);
  return train_step_model(train, val, mc, tc, TrainInit::from_backbone(std::move(backbone), tc.seed), on_epoch);
}

}  // namespace tsan_lab
