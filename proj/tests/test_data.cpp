// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The tsan-lab Authors
 *
 * @file   test_data.cpp
 * @brief  Label process, emission model, splits, benchmark files and .sfm I/O.
 */
#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <set>

#include "test_util.hpp"
#include "tsan_lab/data/synthetic.hpp"

using namespace tsan_lab;
using testing_util::TempDir;

namespace {

BenchmarkSpec tiny_spec() {
  BenchmarkSpec s = default_benchmark_spec();
  s.source_videos = 8;
  s.target_videos = {4, 4, 5};
  s.length = {60, 90};
  s.feature_dim = 8;
  return s;
}

std::vector<char> slurp(const std::filesystem::path& p) { return io::read_file(p); }

/// Held-out accuracy of a least-squares one-hot linear classifier.
double linear_probe(const std::vector<FeatureSequence>& train, const std::vector<FeatureSequence>& test) {
  auto stack = [](const std::vector<FeatureSequence>& vids, Eigen::MatrixXd& x, Eigen::MatrixXd& y) {
    std::size_t rows = 0;
    for (const auto& v : vids) rows += v.length();
    const auto n = static_cast<Eigen::Index>(vids.front().width());
    x.resize(static_cast<Eigen::Index>(rows), n + 1);
    y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), 7);
    Eigen::Index r = 0;
    for (const auto& v : vids)
      for (std::size_t t = 0; t < v.length(); ++t, ++r) {
        x.row(r).head(n) = v.features.mat().row(static_cast<Eigen::Index>(t));
        x(r, n) = 1.0;
        y(r, (*v.labels)[t]) = 1.0;
      }
  };
  Eigen::MatrixXd x, y, xt, yt;
  stack(train, x, y);
  stack(test, xt, yt);
  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += 1e-3;
  const Eigen::MatrixXd w = gram.ldlt().solve(x.transpose() * y);
  const Eigen::MatrixXd scores = xt * w;
  std::size_t ok = 0;
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index pred, truth;
    scores.row(r).maxCoeff(&pred);
    yt.row(r).maxCoeff(&truth);
    ok += pred == truth;
  }
  return static_cast<double>(ok) / static_cast<double>(scores.rows());
}

}  // namespace

TEST(LabelProcess, PureForwardWalkIsMonotone) {
  DomainSpec d = default_benchmark_spec().source;
  d.skip_prob = d.revisit_prob = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const auto y = sample_label_sequence(d, {60, 600}, rng);
    EXPECT_EQ(y.front(), 0);
    for (std::size_t t = 1; t < y.size(); ++t) ASSERT_GE(y[t], y[t - 1]);
  }
}

TEST(LabelProcess, LengthStartAndMinimumRun) {
  const DomainSpec d = default_benchmark_spec().targets[0];
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto y = sample_label_sequence(d, {200, 600}, rng);
    ASSERT_GE(y.size(), 200u);
    ASSERT_LE(y.size(), 600u);
    EXPECT_EQ(y[0], 0);
    // every run except the truncated last one lasts at least 5 s
    std::size_t run = 1;
    for (std::size_t t = 1; t < y.size(); ++t) {
      if (y[t] == y[t - 1]) {
        ++run;
        continue;
      }
      EXPECT_GE(run, 5u);
      run = 1;
    }
    for (int v : y) ASSERT_TRUE(v >= 0 && v < 7);
  }
}

TEST(LabelProcess, AllStepsAppear) {
  const BenchmarkSpec spec = default_benchmark_spec();
  for (const auto* d : spec.domains()) {
    std::vector<std::size_t> hist(7, 0);
    std::size_t total = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      Rng rng(seed);
      for (int v : sample_label_sequence(*d, {200, 600}, rng)) ++hist[static_cast<std::size_t>(v)];
    }
    for (auto h : hist) total += h;
    for (std::size_t c = 0; c < 7; ++c) {
      EXPECT_GT(static_cast<double>(hist[c]) / static_cast<double>(total), 0.01) << d->domain_id << " step " << c;
    }
  }
}

TEST(LabelProcess, RejectsBadRange) {
  Rng rng(0);
  const DomainSpec d = default_benchmark_spec().source;
  EXPECT_THROW(sample_label_sequence(d, {59, 100}, rng), ConfigError);
  EXPECT_THROW(sample_label_sequence(d, {100, 3601}, rng), ConfigError);
  EXPECT_THROW(sample_label_sequence(d, {300, 200}, rng), ConfigError);
}

TEST(Emission, NoiseFreeUnshiftedRowsAgreeAcrossDomains) {
  BenchmarkSpec spec = tiny_spec();
  const SharedEmission shared = make_shared_emission(spec);
  std::vector<int> labels{0, 0, 3, 3, 6, 0};
  std::vector<Tensor> per_domain;
  for (std::size_t d = 0; d < 4; ++d) {
    DomainSpec ds = *spec.domains()[d];
    ds.noise_std = 0.0;
    ds.irrelevant_span_rate = 0.0;
    const DomainEmission em = make_domain_emission(spec, shared, d, 0.0);
    Rng rng(d);
    per_domain.push_back(emit_features(labels, ds, shared, em, rng).features);
  }
  for (std::size_t c = 0; c < 8; ++c) {
    EXPECT_EQ(per_domain[0].at(0, c), per_domain[0].at(1, c));
    EXPECT_EQ(per_domain[0].at(0, c), per_domain[0].at(5, c));
    EXPECT_EQ(per_domain[0].at(2, c), per_domain[0].at(3, c));
  }
  for (std::size_t d = 1; d < 4; ++d) EXPECT_EQ(per_domain[d], per_domain[0]);
}

TEST(Emission, ZeroShiftGivesIdenticalDomainParameters) {
  const BenchmarkSpec spec = tiny_spec();
  const SharedEmission shared = make_shared_emission(spec);
  const DomainEmission a = make_domain_emission(spec, shared, 1, 0.0);
  const DomainEmission b = make_domain_emission(spec, shared, 3, 0.0);
  EXPECT_EQ(a.mix, b.mix);
  EXPECT_EQ(a.offset, b.offset);
  EXPECT_EQ(a.mix, shared.projection);
  const DomainEmission c = make_domain_emission(spec, shared, 3, 0.4);
  EXPECT_GT((c.mix - a.mix).norm(), 0.1);
}

TEST(Emission, RotationIsOrthogonal) {
  Rng rng(4);
  const RowMatrix q = detail::random_orthogonal(16, rng);
  EXPECT_LE((q.transpose() * q - RowMatrix::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Emission, OutOfBodySpansAndFeatureRange) {
  const BenchmarkSpec spec = default_benchmark_spec();
  const SharedEmission shared = make_shared_emission(spec);
  const DomainEmission em = make_domain_emission(spec, shared, 3, spec.targets[2].shift);
  std::size_t irrelevant = 0, total = 0;
  for (std::size_t v = 0; v < 30; ++v) {
    const FeatureSequence s = generate_video(spec, shared, em, 3, v);
    s.validate();
    ASSERT_TRUE(s.labels && s.relevance);
    for (double x : s.features.data()) ASSERT_TRUE(x > -1.0 && x < 1.0);
    for (bool r : *s.relevance) irrelevant += !r;
    total += s.length();
  }
  // rate 0.8 spans per minute of 5-20 s: roughly 12 s of every minute
  const double frac = static_cast<double>(irrelevant) / static_cast<double>(total);
  EXPECT_GT(frac, 0.08);
  EXPECT_LT(frac, 0.30);
}

TEST(Emission, LinearProbeSeparatesSteps) {
  const BenchmarkSpec spec = default_benchmark_spec();
  const SharedEmission shared = make_shared_emission(spec);
  for (std::size_t d = 0; d < 4; ++d) {
    const DomainEmission em = make_domain_emission(spec, shared, d, spec.domains()[d]->shift);
    std::vector<FeatureSequence> train, test;
    for (std::size_t v = 0; v < 20; ++v) (v < 14 ? train : test).push_back(generate_video(spec, shared, em, d, v));
    const double acc = linear_probe(train, test);
    EXPECT_GT(acc, 0.70) << spec.domains()[d]->domain_id;
  }
}

TEST(Emission, StepMeansCorrelateAcrossDomains) {
  const BenchmarkSpec spec = default_benchmark_spec();
  const SharedEmission shared = make_shared_emission(spec);
  auto step_means = [&](std::size_t d) {
    const DomainEmission em = make_domain_emission(spec, shared, d, spec.domains()[d]->shift);
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(7, static_cast<Eigen::Index>(spec.feature_dim));
    std::vector<double> counts(7, 0.0);
    for (std::size_t v = 0; v < 10; ++v) {
      const FeatureSequence s = generate_video(spec, shared, em, d, v);
      for (std::size_t t = 0; t < s.length(); ++t) {
        if (!(*s.relevance)[t]) continue;
        const int y = (*s.labels)[t];
        sums.row(y) += s.features.mat().row(static_cast<Eigen::Index>(t));
        counts[static_cast<std::size_t>(y)] += 1.0;
      }
    }
    for (int y = 0; y < 7; ++y) sums.row(y) /= counts[static_cast<std::size_t>(y)];
    // centre across steps so the cosine reflects step identity, not the shared offset
    const Eigen::RowVectorXd centre = sums.colwise().mean();
    sums.rowwise() -= centre;
    return sums;
  };
  const Eigen::MatrixXd src = step_means(0);
  for (std::size_t d = 1; d < 4; ++d) {
    const Eigen::MatrixXd tgt = step_means(d);
    for (int y = 0; y < 7; ++y) {
      const double cos = src.row(y).dot(tgt.row(y)) / (src.row(y).norm() * tgt.row(y).norm());
      EXPECT_GT(cos, 0.0) << "domain " << d << " step " << y;
    }
  }
}

TEST(Splits, HoldOutArithmetic) {
  // Oracle: test = floor(n/4 + 1/2), val = floor((n - test)/5 + 1/2).
  auto oracle = [](std::size_t n) {
    const std::size_t test = static_cast<std::size_t>(std::floor(n * 0.25 + 0.5));
    const std::size_t val = static_cast<std::size_t>(std::floor((n - test) * 0.2 + 0.5));
    return SplitSizes{n - test - val, val, test};
  };
  for (std::size_t n : {40, 44, 80, 120}) {
    const auto got = split_sizes(n), want = oracle(n);
    EXPECT_EQ(got.train, want.train) << n;
    EXPECT_EQ(got.val, want.val) << n;
    EXPECT_EQ(got.test, want.test) << n;
  }
  const auto src = split_sizes(120);
  EXPECT_EQ(src.train, 72u);
  EXPECT_EQ(src.val, 18u);
  EXPECT_EQ(src.test, 30u);
  // train / val / test counts of the four clinical corpora
  const std::size_t corpora[4][4] = {{1665, 999, 250, 416}, {852, 511, 128, 213}, {229, 138, 34, 57}, {205, 123, 31, 51}};
  for (const auto& row : corpora) {
    const auto s = split_sizes(row[0]);
    EXPECT_EQ(s.train, row[1]);
    EXPECT_EQ(s.val, row[2]);
    EXPECT_EQ(s.test, row[3]);
  }
}

TEST(Splits, DisjointAndCoverAllClasses) {
  const BenchmarkSpec spec = default_benchmark_spec();
  for (std::size_t d = 0; d < 4; ++d) {
    const auto splits = assign_splits(spec, d);
    const auto sizes = split_sizes(spec.videos_in(d));
    EXPECT_EQ(static_cast<std::size_t>(std::count(splits.begin(), splits.end(), Split::test)), sizes.test);
    EXPECT_EQ(static_cast<std::size_t>(std::count(splits.begin(), splits.end(), Split::val)), sizes.val);
    std::set<int> seen;
    for (std::size_t v = 0; v < splits.size(); ++v) {
      if (splits[v] != Split::train) continue;
      Rng rng(derive_seed(spec.master_seed, video_stream(d, v)));
      for (int y : sample_label_sequence(*spec.domains()[d], spec.length, rng)) seen.insert(y);
    }
    EXPECT_EQ(seen.size(), 7u) << spec.domains()[d]->domain_id;
  }
}

TEST(Benchmark, GenerationIsDeterministicAndConsistent) {
  TempDir a;
  const auto dir_a = a.path() / "a", dir_b = a.path() / "b";
  const BenchmarkSpec spec = tiny_spec();
  const auto entries = generate_benchmark(spec, dir_a);
  generate_benchmark(spec, dir_b);
  EXPECT_EQ(slurp(dir_a / kManifestName), slurp(dir_b / kManifestName));
  for (const auto& e : entries) EXPECT_EQ(slurp(dir_a / e.path), slurp(dir_b / e.path)) << e.path;

  const Benchmark bench(dir_a);
  EXPECT_EQ(bench.domains(), (std::vector<std::string>{"source", "target_a", "target_b", "target_c"}));
  std::set<std::string> ids;
  for (const auto& e : bench.entries()) EXPECT_TRUE(ids.insert(e.id).second) << e.id;
  std::size_t total = 0;
  for (const auto& dom : bench.domains()) {
    for (Split s : {Split::train, Split::val, Split::test}) {
      const Dataset data = bench.load(dom, s);
      total += data.size();
      for (const auto& seq : data) EXPECT_EQ(seq.width(), 8u);
    }
  }
  EXPECT_EQ(total, 8u + 4 + 4 + 5);
  EXPECT_EQ(bench.select("source", Split::test).size(), split_sizes(8).test);

  // the spec text parses back to the same benchmark
  ConfigReader cfg(read_config_file(dir_a / kBenchmarkSpecName));
  const BenchmarkSpec back = read_benchmark_spec(cfg);
  cfg.finish();
  EXPECT_EQ(back.source_videos, 8u);
  EXPECT_EQ(back.feature_dim, 8u);
  EXPECT_EQ(back.embedding_scale, spec.embedding_scale);
}

TEST(Benchmark, ManifestLengthMismatchIsFormatError) {
  TempDir t;
  generate_benchmark(tiny_spec(), t.path());
  Benchmark bench(t.path());
  auto sel = bench.select("target_a", Split::test);
  sel[0].length += 1;
  EXPECT_THROW(bench.load(sel), FormatError);
  EXPECT_THROW(Benchmark(t.path() / "missing"), FormatError);
}

TEST(Benchmark, SpecValidation) {
  ConfigReader bad(parse_config_text("shift = 1.5\n"));
  EXPECT_THROW(read_benchmark_spec(bad), ConfigError);
  ConfigReader counts(parse_config_text("target_videos = 4,4\n"));
  EXPECT_THROW(read_benchmark_spec(counts), ConfigError);
  ConfigReader unknown(parse_config_text("shfit = 0.5\n"));
  read_benchmark_spec(unknown);
  EXPECT_THROW(unknown.finish(), ConfigError);
}

TEST(SequenceFile, RoundTripIsBitExact) {
  TempDir t;
  FeatureSequence s{"vid", testing_util::random_features(13, 5, 3), std::vector<int>(13), std::vector<bool>(13)};
  for (std::size_t i = 0; i < 13; ++i) {
    (*s.labels)[i] = static_cast<int>(i % 7);
    (*s.relevance)[i] = i % 3 != 0;
  }
  write_sequence(t.path() / "vid.sfm", s);
  EXPECT_EQ(read_sequence(t.path() / "vid.sfm"), s);
  FeatureSequence bare{"bare", testing_util::random_features(2, 3, 4), std::nullopt, std::nullopt};
  write_sequence(t.path() / "bare.sfm", bare);
  EXPECT_EQ(read_sequence(t.path() / "bare.sfm"), bare);
  // header layout: 4 + 4 + 8 + 8 + 1 + 1, then labels, relevance, floats
  EXPECT_EQ(slurp(t.path() / "vid.sfm").size(), 26u + 13 + 13 + 13 * 5 * 4);
}

TEST(SequenceFile, DistinctErrors) {
  FeatureSequence s{"v", testing_util::random_features(10, 2, 1), std::vector<int>(10, 1), std::nullopt};
  std::vector<char> bytes = encode_sequence(s);
  auto magic = bytes;
  magic[0] = magic[1] = magic[2] = magic[3] = 'X';
  EXPECT_THROW(decode_sequence(magic, "v"), BadMagicError);
  auto version = bytes;
  version[4] = 2;
  EXPECT_THROW(decode_sequence(version, "v"), VersionMismatchError);
  auto truncated = bytes;
  truncated.resize(truncated.size() - 2 * 4);  // one row of two floats missing
  EXPECT_THROW(decode_sequence(truncated, "v"), TruncatedError);
  auto header_only = bytes;
  header_only.resize(10);
  EXPECT_THROW(decode_sequence(header_only, "v"), TruncatedError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_sequence(trailing, "v"), FormatError);
  EXPECT_THROW(read_sequence("/nonexistent/none.sfm"), FormatError);
}

TEST(SequenceFile, ValidationOfLengths) {
  FeatureSequence s{"v", Tensor({3, 2}), std::vector<int>(2, 0), std::nullopt};
  EXPECT_THROW(s.validate(), ShapeError);
  const FeatureSequence sub = select_rows(
      FeatureSequence{"w", Tensor::matrix({{1, 2}, {3, 4}, {5, 6}}), std::vector<int>{0, 1, 2},
                      std::vector<bool>{true, false, true}},
      {0, 2});
  EXPECT_EQ(sub.features, Tensor::matrix({{1, 2}, {5, 6}}));
  EXPECT_EQ(*sub.labels, (std::vector<int>{0, 2}));
  EXPECT_EQ(*sub.relevance, (std::vector<bool>{true, true}));
}
