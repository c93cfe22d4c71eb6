// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The tsan-lab Authors
 *
 * @file   test_seso.cpp
 * @brief  Permutation codebook, segment puzzles, sorting head and pretraining.
 */
#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "tsan_lab/numerics/grad_check.hpp"
#include "tsan_lab/seso/seso.hpp"

using namespace tsan_lab;
using testing_util::random_tensor;

namespace {

Tensor concat_rows(const std::vector<Tensor>& parts) {
  std::vector<double> data;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    data.insert(data.end(), p.data().begin(), p.data().end());
    rows += p.rows();
  }
  return Tensor({rows, parts.front().cols()}, std::move(data));
}

ModelConfig small(ArchKind kind, std::size_t input = 5, std::size_t hidden = 3) {
  ModelConfig c;
  c.kind = kind;
  c.input_dim = input;
  c.hidden = hidden;
  return c;
}

Dataset random_dataset(std::size_t videos, std::size_t length, std::size_t width, std::uint64_t seed) {
  Dataset out;
  for (std::size_t v = 0; v < videos; ++v) {
    // smooth random walk so segment order carries signal
    Tensor x({length, width});
    Rng rng(derive_seed(seed, v));
    std::normal_distribution<double> n(0.0, 0.3);
    for (std::size_t t = 0; t < length; ++t)
      for (std::size_t c = 0; c < width; ++c) x.at(t, c) = static_cast<float>(std::tanh((t > 0 ? x.at(t - 1, c) : 0.0) + n(rng)));
    out.push_back({"v" + std::to_string(v), x, std::nullopt, std::nullopt});
  }
  return out;
}

TrainConfig quiet_train(std::size_t epochs, std::uint64_t seed) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.seed = seed;
  tc.dropout_rate = 0.0;
  return tc;
}

}  // namespace

TEST(PermutationTable, SmallTables) {
  const auto one = build_permutation_table(1, 3);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one.perms[0], identity_permutation());
  const auto two = build_permutation_table(2, 3);
  EXPECT_EQ(hamming(two.perms[1], identity_permutation()), 9u);
  EXPECT_THROW(build_permutation_table(0, 1), ConfigError);
  EXPECT_THROW(build_permutation_table(kSegmentOrderings + 1, 1), ConfigError);
}

TEST(PermutationTable, SixtyFourDistinctSpreadEntries) {
  const auto table = build_permutation_table(64, 9);
  ASSERT_EQ(table.size(), 64u);
  EXPECT_EQ(table.perms[0], identity_permutation());
  std::size_t min_dist = kSegments;
  for (std::size_t i = 0; i < table.size(); ++i) {
    EXPECT_TRUE(is_permutation_of_segments(table.perms[i]));
    for (std::size_t j = i + 1; j < table.size(); ++j) min_dist = std::min(min_dist, hamming(table.perms[i], table.perms[j]));
  }
  EXPECT_GE(min_dist, 2u);
  const auto again = build_permutation_table(64, 9);
  EXPECT_EQ(again.perms, table.perms);
  EXPECT_NE(build_permutation_table(64, 10).perms, table.perms);
}

TEST(SplitNine, SegmentLengths) {
  auto lengths = [](std::size_t length) {
    std::vector<std::size_t> out;
    for (const auto& s : split_nine(Tensor({length, 2}))) out.push_back(s.rows());
    return out;
  };
  EXPECT_EQ(lengths(9), std::vector<std::size_t>(9, 1));
  EXPECT_EQ(lengths(18), std::vector<std::size_t>(9, 2));
  EXPECT_EQ(lengths(100), (std::vector<std::size_t>{12, 11, 11, 11, 11, 11, 11, 11, 11}));
  EXPECT_THROW(split_nine(Tensor({8, 2})), ShapeError);
}

TEST(SplitNine, PartitionReconstructsInput) {
  for (std::size_t length = 9; length < 120; length += 5) {
    const Tensor x = random_tensor({length, 3}, length);
    const auto parts = split_nine(x);
    ASSERT_EQ(parts.size(), 9u);
    EXPECT_EQ(concat_rows(parts), x);
  }
}

TEST(SortingExample, IdentityAndInverse) {
  const auto table = build_permutation_table(24, 1);
  const Tensor x = random_tensor({50, 4}, 2);
  EXPECT_EQ(concat_rows(make_sorting_example(x, table, 0).segments), x);
  Rng rng(5);
  for (int k = 0; k < 30; ++k) {
    const SortingExample ex = make_sorting_example(x, table, rng);
    EXPECT_EQ(concat_rows(unshuffle(ex, table)), x);
    const auto parts = split_nine(x);
    for (std::size_t i = 0; i < kSegments; ++i) EXPECT_EQ(ex.segments[i], parts[table.perms[ex.target_class][i]]);
  }
  EXPECT_THROW(make_sorting_example(x, table, 24), IndexError);
}

TEST(SortingExample, ClassHistogramIsUniform) {
  const std::size_t p = 8, draws = 10000;
  const auto table = build_permutation_table(p, 1);
  const Tensor x = random_tensor({9, 1}, 2);
  Rng rng(77);
  std::vector<std::size_t> hist(p, 0);
  for (std::size_t k = 0; k < draws; ++k) ++hist[make_sorting_example(x, table, rng).target_class];
  const double expect = static_cast<double>(draws) / p;
  const double sigma = std::sqrt(draws * (1.0 / p) * (1.0 - 1.0 / p));
  for (auto h : hist) EXPECT_LE(std::abs(static_cast<double>(h) - expect), 3.0 * sigma);
}

TEST(SesoLogProbs, NormalizedZeroParamsAndPositionSensitive) {
  const auto table = build_permutation_table(6, 1);
  const Tensor x = random_tensor({40, 5}, 3);
  for (auto kind : {ArchKind::conv_ensemble, ArchKind::lstm, ArchKind::tsan}) {
    const ModelConfig mc = small(kind);
    Backbone b = build_backbone(mc, 2);
    DenseParams head = build_seso_head(mc, 6, 2);
    Rng rng(0);
    const SortingExample ex = make_sorting_example(x, table, 3);
    const Tensor lp = seso_log_probs(std::as_const(b), std::as_const(head), ex, false, rng).value();
    ASSERT_EQ(lp.shape(), (Shape{1, 6}));
    double s = 0.0;
    for (double v : lp.data()) s += std::exp(v);
    EXPECT_NEAR(s, 1.0, 1e-12);

    SortingExample swapped = ex;
    std::swap(swapped.segments[0], swapped.segments[4]);
    const Tensor lp2 = seso_log_probs(std::as_const(b), std::as_const(head), swapped, false, rng).value();
    EXPECT_GT((lp.mat() - lp2.mat()).cwiseAbs().maxCoeff(), 1e-9) << to_string(kind);

    for (Parameter* p : b.parameters()) p->value.fill(0.0);
    head.weight.value.fill(0.0);
    head.bias.value.fill(0.0);
    const Tensor uni = seso_log_probs(std::as_const(b), std::as_const(head), ex, false, rng).value();
    for (double v : uni.data()) EXPECT_NEAR(v, std::log(1.0 / 6.0), 1e-12);
  }
}

TEST(SesoLogProbs, TimeStretchInvariantForPointwiseEnsemble) {
  ModelConfig mc = small(ArchKind::conv_ensemble);
  mc.kernel_sizes = {1, 1};
  const Backbone b = build_backbone(mc, 4);
  const DenseParams head = build_seso_head(mc, 5, 4);
  const auto table = build_permutation_table(5, 2);
  const Tensor x = random_tensor({27, 5}, 6);
  Tensor stretched({54, 5});
  for (std::size_t t = 0; t < 54; ++t)
    for (std::size_t c = 0; c < 5; ++c) stretched.at(t, c) = x.at(t / 2, c);
  Rng rng(0);
  for (std::size_t cls = 0; cls < 5; ++cls) {
    const Tensor a = seso_log_probs(b, head, make_sorting_example(x, table, cls), false, rng).value();
    const Tensor s = seso_log_probs(b, head, make_sorting_example(stretched, table, cls), false, rng).value();
    EXPECT_LE((a.mat() - s.mat()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(SesoLogProbs, GradientCheck) {
  const ModelConfig mc = small(ArchKind::tsan, 4, 2);
  Backbone b = build_backbone(mc, 8);
  DenseParams head = build_seso_head(mc, 4, 8);
  const auto table = build_permutation_table(4, 1);
  const SortingExample ex = make_sorting_example(random_tensor({18, 4}, 9), table, 2);
  std::vector<Parameter*> ps = b.parameters();
  collect(head, ps);
  const int target = 2;
  auto f = [&] {
    Rng rng(5);
    return nll_loss(seso_log_probs(b, head, ex, true, rng), std::span<const int>(&target, 1));
  };
  EXPECT_LE(grad_check(f, ps).max_rel_error, 1e-4);
}

TEST(Pretrain, ConstantDataStaysAtChance) {
  const std::size_t p = 4;
  Dataset data;
  for (int v = 0; v < 6; ++v) data.push_back({"c" + std::to_string(v), Tensor({36, 5}, 0.5), std::nullopt, std::nullopt});
  SesoConfig sc;
  sc.permutations = p;
  sc.epochs = 5;
  sc.val_puzzles = 50;
  const auto r = pretrain_seso(data, data, small(ArchKind::lstm), quiet_train(5, 1), sc);
  // L divisible by 9: all segments are identical, so every puzzle gets the same prediction
  const double n = 6.0 * 50.0;
  const double sigma = std::sqrt(n * (1.0 / p) * (1.0 - 1.0 / p)) / n;
  for (const auto& e : r.history.epochs) EXPECT_LE(std::abs(e.val_accuracy - 1.0 / p), 3.0 * sigma + 1e-12);
}

TEST(Pretrain, LossOnFixedPuzzlesDecreases) {
  const Dataset data = random_dataset(5, 45, 5, 3);
  SesoConfig sc;
  sc.permutations = 4;
  sc.val_puzzles = 2;
  sc.lr = 1e-3;
  const ModelConfig mc = small(ArchKind::conv_ensemble);
  std::vector<double> losses;
  for (std::size_t epochs = 1; epochs <= 5; ++epochs) {
    sc.epochs = epochs;
    const auto r = pretrain_seso(data, data, mc, quiet_train(1, 11), sc);
    const auto puzzles = fixed_puzzles(data, r.table, 24, 1234);
    losses.push_back(sorting_loss(r.model, puzzles));
  }
  for (std::size_t i = 1; i < losses.size(); ++i) EXPECT_LE(losses[i], losses[i - 1] + 1e-6) << "epoch " << i + 1;
}

TEST(Pretrain, DeterministicCheckpointBytes) {
  const Dataset data = random_dataset(4, 30, 5, 8);
  SesoConfig sc;
  sc.permutations = 6;
  sc.epochs = 2;
  const auto a = pretrain_seso(data, data, small(ArchKind::tsan), quiet_train(1, 2), sc);
  const auto b = pretrain_seso(data, data, small(ArchKind::tsan), quiet_train(1, 2), sc);
  EXPECT_EQ(encode_checkpoint(a.checkpoint()), encode_checkpoint(b.checkpoint()));
  ASSERT_EQ(a.history.epochs.size(), 2u);
  EXPECT_EQ(a.history.epochs[1].train_loss, b.history.epochs[1].train_loss);
  EXPECT_EQ(a.checkpoint().permutations->count, 6u);
}

TEST(Pretrain, SkipsShortSequences) {
  Dataset data = random_dataset(3, 20, 5, 8);
  data.push_back({"short", Tensor({5, 5}), std::nullopt, std::nullopt});
  SesoConfig sc;
  sc.permutations = 3;
  sc.epochs = 1;
  EXPECT_NO_THROW(pretrain_seso(data, data, small(ArchKind::lstm), quiet_train(1, 2), sc));
  Dataset only_short{{"short", Tensor({5, 5}), std::nullopt, std::nullopt}};
  EXPECT_THROW(pretrain_seso(only_short, only_short, small(ArchKind::lstm), quiet_train(1, 2), sc), ConfigError);
}

TEST(StripToBackbone, RoundTripDropsHead) {
  const Dataset data = random_dataset(3, 27, 5, 1);
  SesoConfig sc;
  sc.permutations = 3;
  sc.epochs = 1;
  const auto r = pretrain_seso(data, data, small(ArchKind::tsan), quiet_train(1, 4), sc);
  const Checkpoint ck = decode_checkpoint(encode_checkpoint(r.checkpoint()), "mem");
  const Backbone stripped = strip_to_backbone(ck);
  for (const Parameter* p : stripped.parameters()) EXPECT_FALSE(p->name.starts_with("seso_head"));
  Rng rng(0);
  const Tensor x = random_tensor({12, 5}, 3);
  EXPECT_EQ(backbone_forward(stripped, x, false, rng).value(),
            backbone_forward(std::as_const(r.model.backbone), x, false, rng).value());
  const Checkpoint plain = make_checkpoint(stripped);
  EXPECT_THROW(strip_to_backbone(plain), FormatError);
}
