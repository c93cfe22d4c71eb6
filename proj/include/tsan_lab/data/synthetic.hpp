// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The tsan-lab Authors
 *
 * @file   synthetic.hpp
 * @brief  Synthetic multi-domain workflow benchmark.
 *
 * Each domain is a procedure type with the same seven steps. Step semantics
 * are shared across domains through benchmark-global step embeddings e_y
 * (dimension E) and a global projection P (N x E); a domain changes how the
 * steps look through an orthogonal mix R_d and an offset o_d, blended by the
 * shift magnitude delta:
 *
 *   x_t = tanh(M_d (e_y + sigma * eps_t) + delta * o_d),
 *   M_d = (1 - delta) P + delta R_d P.
 *
 * Labels follow a semi-Markov walk over the steps with per-domain durations,
 * occasional skips and revisits. Out-of-body spans carry relevance = false
 * and features from a global distribution, but keep their step label.
 *
 * Per-video randomness is seeded by derive_seed(master, stream) with
 * stream = domain_index * 2^20 + video_index, so videos can be generated in
 * any order.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "tsan_lab/config.hpp"
#include "tsan_lab/data/sequence.hpp"
#include "tsan_lab/models/model.hpp"
#include "tsan_lab/rng.hpp"

namespace tsan_lab {

struct DomainSpec {
  std::string domain_id;
  std::size_t num_steps = kNumSteps;
  /// Relative mean duration of each step; rescaled so one walk spans the drawn length.
  std::vector<double> duration_mean{30, 40, 90, 60, 70, 40, 40};
  double shift = 0.4;                // delta
  double noise_std = 0.3;            // sigma
  double skip_prob = 0.05;
  double revisit_prob = 0.05;
  double irrelevant_span_rate = 0.5; // spans per minute

  void validate() const {
    auto prob = [&](double p, const char* what) {
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(domain_id + ": " + what + " must be in [0, 1]");
    };
    prob(shift, "shift");
    prob(skip_prob, "skip_prob");
    prob(revisit_prob, "revisit_prob");
    if (skip_prob + revisit_prob > 1.0) throw ConfigError(domain_id + ": skip_prob + revisit_prob exceeds 1");
    if (!(noise_std > 0.0)) throw ConfigError(domain_id + ": noise_std must be positive");
    if (irrelevant_span_rate < 0.0) throw ConfigError(domain_id + ": irrelevant_span_rate must be non-negative");
    if (duration_mean.size() != num_steps) throw ConfigError(domain_id + ": need one duration per step");
    for (double d : duration_mean) {
      if (!(d > 0.0)) throw ConfigError(domain_id + ": step durations must be positive");
    }
  }
};

struct LengthRange {
  std::size_t min = 200;
  std::size_t max = 600;
};

struct BenchmarkSpec {
  DomainSpec source;
  std::vector<DomainSpec> targets;
  std::size_t source_videos = 120;
  std::vector<std::size_t> target_videos{40, 44, 80};
  LengthRange length;
  std::size_t feature_dim = 64;       // N
  std::size_t embedding_dim = 16;     // E
  double embedding_scale = 0.25;      // std of step-embedding entries
  double test_fraction = 0.25;
  double val_fraction = 0.2;          // of the non-test remainder
  std::uint64_t master_seed = 2021;

  [[nodiscard]] std::vector<const DomainSpec*> domains() const {
    std::vector<const DomainSpec*> out{&source};
    for (const auto& t : targets) out.push_back(&t);
    return out;
  }
  [[nodiscard]] std::size_t videos_in(std::size_t domain_index) const {
    return domain_index == 0 ? source_videos : target_videos.at(domain_index - 1);
  }

  void validate() const {
    if (targets.size() != target_videos.size()) throw ConfigError("one video count per target domain required");
    if (feature_dim == 0 || embedding_dim == 0) throw ConfigError("feature_dim and embedding_dim must be positive");
    if (length.min < 60 || length.max > 3600 || length.min > length.max) {
      throw ConfigError("length range must satisfy 60 <= min <= max <= 3600");
    }
    if (!(test_fraction > 0 && test_fraction < 1 && val_fraction > 0 && val_fraction < 1)) {
      throw ConfigError("split fractions must be in (0, 1)");
    }
    for (const auto* d : domains()) d->validate();
  }
};

/// Four domains (one source, three targets) with distinct workflow statistics.
inline BenchmarkSpec default_benchmark_spec() {
  BenchmarkSpec s;
  s.source.domain_id = "source";
  s.source.duration_mean = {30, 40, 90, 60, 70, 40, 40};
  DomainSpec a;
  a.domain_id = "target_a";
  a.duration_mean = {25, 50, 110, 40, 80, 35, 30};
  a.skip_prob = 0.08;
  DomainSpec b;
  b.domain_id = "target_b";
  b.duration_mean = {35, 30, 100, 70, 50, 45, 40};
  b.revisit_prob = 0.08;
  DomainSpec c;
  c.domain_id = "target_c";
  c.duration_mean = {20, 45, 80, 80, 60, 30, 45};
  c.irrelevant_span_rate = 0.8;
  s.targets = {a, b, c};
  return s;
}

/// Reads benchmark keys over the defaults. Shift, noise and transition
/// probabilities apply to every domain.
inline BenchmarkSpec read_benchmark_spec(ConfigReader& cfg) {
  BenchmarkSpec s = default_benchmark_spec();
  s.master_seed = cfg.get_uint("master_seed", s.master_seed);
  s.feature_dim = cfg.get_uint("feature_dim", s.feature_dim);
  s.embedding_dim = cfg.get_uint("embedding_dim", s.embedding_dim);
  s.embedding_scale = cfg.get_double("embedding_scale", s.embedding_scale);
  s.length.min = cfg.get_uint("min_length", s.length.min);
  s.length.max = cfg.get_uint("max_length", s.length.max);
  s.source_videos = cfg.get_uint("source_videos", s.source_videos);
  const auto tv = cfg.get_uint_list("target_videos", {s.target_videos.begin(), s.target_videos.end()});
  if (tv.size() != s.targets.size()) throw ConfigError("target_videos needs exactly 3 counts");
  s.target_videos.assign(tv.begin(), tv.end());
  s.test_fraction = cfg.get_double("test_fraction", s.test_fraction);
  s.val_fraction = cfg.get_double("val_fraction", s.val_fraction);
  std::vector<DomainSpec*> all{&s.source};
  for (auto& t : s.targets) all.push_back(&t);
  auto each = [&](const char* key, double DomainSpec::*field) {
    if (!cfg.has(key)) {
      cfg.get_string(key, "");
      return;
    }
    const double v = cfg.get_double(key, 0.0);
    for (auto* d : all) d->*field = v;
  };
  each("shift", &DomainSpec::shift);
  each("noise_std", &DomainSpec::noise_std);
  each("skip_prob", &DomainSpec::skip_prob);
  each("revisit_prob", &DomainSpec::revisit_prob);
  each("irrelevant_span_rate", &DomainSpec::irrelevant_span_rate);
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Label process
// ---------------------------------------------------------------------------

/**
 * Semi-Markov step walk of a drawn total length: starts at step 0, spends a
 * geometric duration (mean rescaled to the drawn length, at least 5 s) in each
 * step, then advances one step, skips one with skip_prob, or revisits a
 * uniformly chosen earlier step with revisit_prob before resuming. The walk
 * is truncated to the drawn length, or its final step extended to fill it.
 */
inline std::vector<int> sample_label_sequence(const DomainSpec& spec, LengthRange range, Rng& rng) {
  if (range.min < 60 || range.max > 3600 || range.min > range.max) {
    throw ConfigError("label length range must satisfy 60 <= min <= max <= 3600");
  }
  const auto length = std::uniform_int_distribution<std::size_t>(range.min, range.max)(rng);
  const double total_mean = std::accumulate(spec.duration_mean.begin(), spec.duration_mean.end(), 0.0);
  const double stretch = static_cast<double>(length) / total_mean;
  const int last = static_cast<int>(spec.num_steps) - 1;

  auto duration = [&](int step) {
    const double mean = std::max(1.0, spec.duration_mean[static_cast<std::size_t>(step)] * stretch);
    std::geometric_distribution<std::size_t> geo(1.0 / mean);
    return std::max<std::size_t>(5, geo(rng) + 1);
  };

  std::vector<int> labels;
  labels.reserve(length + 64);
  int step = 0;
  while (labels.size() < length) {
    labels.insert(labels.end(), duration(step), step);
    if (step == last) break;
    const double u = uniform01(rng);
    if (u < spec.revisit_prob && step > 0) {
      const int earlier = std::uniform_int_distribution<int>(0, step - 1)(rng);
      if (labels.size() < length) labels.insert(labels.end(), duration(earlier), earlier);
      step += 1;
    } else if (u < spec.revisit_prob + spec.skip_prob && step + 2 <= last) {
      step += 2;
    } else {
      step += 1;
    }
  }
  if (labels.size() < length) labels.resize(length, labels.back());
  labels.resize(length);
  return labels;
}

// ---------------------------------------------------------------------------
// Emission model
// ---------------------------------------------------------------------------

/// Benchmark-global emission parameters shared by all domains.
struct SharedEmission {
  RowMatrix step_embeddings;  // steps x E
  RowMatrix projection;       // N x E
  Eigen::RowVectorXd out_of_body_mean;  // N
};

/// Domain-specific appearance: mixed projection and offset.
struct DomainEmission {
  RowMatrix mix;                // N x E, (1 - delta) P + delta R_d P
  Eigen::RowVectorXd offset;    // delta * o_d
};

namespace detail {
inline RowMatrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

/// Orthonormalizes the columns of a Gaussian matrix (modified Gram-Schmidt).
inline RowMatrix random_orthogonal(Eigen::Index n, Rng& rng) {
  RowMatrix q = gaussian_matrix(n, n, 1.0, rng);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < j; ++k) q.col(j) -= q.col(k).dot(q.col(j)) * q.col(k);
    q.col(j).normalize();
  }
  return q;
}
}  // namespace detail

inline SharedEmission make_shared_emission(const BenchmarkSpec& spec) {
  Rng rng(derive_seed(spec.master_seed, 0xE0));
  const auto e = static_cast<Eigen::Index>(spec.embedding_dim);
  const auto n = static_cast<Eigen::Index>(spec.feature_dim);
  SharedEmission s;
  s.step_embeddings = detail::gaussian_matrix(static_cast<Eigen::Index>(kNumSteps), e, spec.embedding_scale, rng);
  s.projection = detail::gaussian_matrix(n, e, 1.0 / std::sqrt(static_cast<double>(e)), rng);
  s.out_of_body_mean = detail::gaussian_matrix(1, n, 1.0, rng).row(0);
  return s;
}

inline DomainEmission make_domain_emission(const BenchmarkSpec& spec, const SharedEmission& shared,
                                           std::size_t domain_index, double shift) {
  Rng rng(derive_seed(spec.master_seed, 0xD0 + domain_index));
  const auto n = static_cast<Eigen::Index>(spec.feature_dim);
  const RowMatrix rotation = detail::random_orthogonal(n, rng);
  const Eigen::RowVectorXd offset = detail::gaussian_matrix(1, n, 0.5, rng).row(0);
  return {(1.0 - shift) * shared.projection + shift * rotation * shared.projection, shift * offset};
}

/**
 * Features for a label sequence. Out-of-body spans start with probability
 * rate/60 at each second outside a span and last 5-20 s. Values are rounded
 * to float so the sequence survives the .sfm round trip bit-exactly.
 */
inline FeatureSequence emit_features(const std::vector<int>& labels, const DomainSpec& spec,
                                     const SharedEmission& shared, const DomainEmission& domain, Rng& rng,
                                     std::string id = {}) {
  const auto length = labels.size();
  const auto n = static_cast<Eigen::Index>(shared.projection.rows());
  const auto e = static_cast<Eigen::Index>(shared.projection.cols());
  if (length == 0) throw ShapeError("emit_features: empty label sequence");
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<bool> relevant(length, true);
  const double start_prob = spec.irrelevant_span_rate / 60.0;
  for (std::size_t t = 0; t < length;) {
    if (uniform01(rng) < start_prob) {
      const auto span = std::uniform_int_distribution<std::size_t>(5, 20)(rng);
      for (std::size_t k = 0; k < span && t < length; ++k, ++t) relevant[t] = false;
    } else {
      ++t;
    }
  }

  Tensor x({length, static_cast<std::size_t>(n)});
  auto xm = x.mat();
  Eigen::RowVectorXd latent(e);
  Eigen::RowVectorXd pre(n);
  for (std::size_t t = 0; t < length; ++t) {
    const int y = labels[t];
    if (y < 0 || y >= static_cast<int>(kNumSteps)) throw IndexError("emit_features: label out of range");
    const auto row = static_cast<Eigen::Index>(t);
    if (relevant[t]) {
      for (Eigen::Index j = 0; j < e; ++j) latent(j) = shared.step_embeddings(y, j) + spec.noise_std * normal(rng);
      pre.noalias() = latent * domain.mix.transpose();
      pre += domain.offset;
    } else {
      for (Eigen::Index j = 0; j < n; ++j) pre(j) = shared.out_of_body_mean(j) + spec.noise_std * normal(rng);
    }
    for (Eigen::Index j = 0; j < n; ++j) xm(row, j) = static_cast<float>(std::tanh(pre(j)));
  }
  return {std::move(id), std::move(x), labels, std::move(relevant)};
}

// ---------------------------------------------------------------------------
// Splits and benchmark generation
// ---------------------------------------------------------------------------

enum class Split { train, val, test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw FormatError("unknown split '" + s + "'");
}

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

/// test = round(total * test_fraction); val = round((total - test) * val_fraction).
inline SplitSizes split_sizes(std::size_t total, double test_fraction = 0.25, double val_fraction = 0.2) {
  SplitSizes s;
  s.test = static_cast<std::size_t>(std::llround(static_cast<double>(total) * test_fraction));
  s.val = static_cast<std::size_t>(std::llround(static_cast<double>(total - s.test) * val_fraction));
  if (s.test + s.val > total) throw ConfigError("split sizes exceed the number of videos");
  s.train = total - s.test - s.val;
  return s;
}

struct ManifestEntry {
  std::string id;
  std::string domain;
  Split split = Split::train;
  std::string path;  // relative to the benchmark directory
  std::size_t length = 0;
};

inline std::uint64_t video_stream(std::size_t domain_index, std::size_t video_index) {
  return (static_cast<std::uint64_t>(domain_index) << 20) + video_index;
}

/// One video of one domain, deterministic in (spec, domain_index, video_index).
inline FeatureSequence generate_video(const BenchmarkSpec& spec, const SharedEmission& shared,
                                      const DomainEmission& emission, std::size_t domain_index,
                                      std::size_t video_index) {
  const DomainSpec& d = *spec.domains().at(domain_index);
  Rng rng(derive_seed(spec.master_seed, video_stream(domain_index, video_index)));
  const auto labels = sample_label_sequence(d, spec.length, rng);
  char id[64];
  std::snprintf(id, sizeof id, "%s_%04zu", d.domain_id.c_str(), video_index);
  return emit_features(labels, d, shared, emission, rng, id);
}

/// Split assignment of a domain's videos: a seeded shuffle, test first, then validation.
inline std::vector<Split> assign_splits(const BenchmarkSpec& spec, std::size_t domain_index) {
  const std::size_t total = spec.videos_in(domain_index);
  const auto sizes = split_sizes(total, spec.test_fraction, spec.val_fraction);
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(spec.master_seed, 0x5F000 + domain_index));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Split> out(total, Split::train);
  for (std::size_t i = 0; i < sizes.test; ++i) out[order[i]] = Split::test;
  for (std::size_t i = sizes.test; i < sizes.test + sizes.val; ++i) out[order[i]] = Split::val;
  return out;
}

inline constexpr const char* kManifestName = "manifest.tsv";
inline constexpr const char* kBenchmarkSpecName = "benchmark.cfg";

inline std::string format_benchmark_spec(const BenchmarkSpec& s) {
  ConfigMap m;
  m["master_seed"] = std::to_string(s.master_seed);
  m["feature_dim"] = std::to_string(s.feature_dim);
  m["embedding_dim"] = std::to_string(s.embedding_dim);
  m["embedding_scale"] = format_double(s.embedding_scale);
  m["min_length"] = std::to_string(s.length.min);
  m["max_length"] = std::to_string(s.length.max);
  m["source_videos"] = std::to_string(s.source_videos);
  std::string tv;
  for (auto v : s.target_videos) tv += (tv.empty() ? "" : ",") + std::to_string(v);
  m["target_videos"] = tv;
  m["test_fraction"] = format_double(s.test_fraction);
  m["val_fraction"] = format_double(s.val_fraction);
  m["shift"] = format_double(s.source.shift);
  m["noise_std"] = format_double(s.source.noise_std);
  m["skip_prob"] = format_double(s.source.skip_prob);
  m["revisit_prob"] = format_double(s.source.revisit_prob);
  m["irrelevant_span_rate"] = format_double(s.source.irrelevant_span_rate);
  return format_config(m);
}

/**
 * Writes <out>/<domain>/<id>.sfm for every video plus the manifest
 * ("id<TAB>domain<TAB>split<TAB>path<TAB>L", '#' lines document split arithmetic).
 */
inline std::vector<ManifestEntry> generate_benchmark(const BenchmarkSpec& spec, const std::filesystem::path& out) {
  spec.validate();
  const SharedEmission shared = make_shared_emission(spec);
  std::vector<ManifestEntry> entries;
  std::string manifest = "# synthetic workflow benchmark, master_seed " + std::to_string(spec.master_seed) + "\n";
  const auto domains = spec.domains();
  for (std::size_t d = 0; d < domains.size(); ++d) {
    const auto total = spec.videos_in(d);
    const auto sizes = split_sizes(total, spec.test_fraction, spec.val_fraction);
    manifest += "# " + domains[d]->domain_id + ": total " + std::to_string(total) + ", test round(" +
                std::to_string(total) + "*" + format_double(spec.test_fraction) + ")=" + std::to_string(sizes.test) +
                ", val round(" + std::to_string(total - sizes.test) + "*" + format_double(spec.val_fraction) +
                ")=" + std::to_string(sizes.val) + ", train " + std::to_string(sizes.train) + "\n";
  }
  for (std::size_t d = 0; d < domains.size(); ++d) {
    const DomainEmission emission = make_domain_emission(spec, shared, d, domains[d]->shift);
    const auto splits = assign_splits(spec, d);
    for (std::size_t v = 0; v < splits.size(); ++v) {
      const FeatureSequence seq = generate_video(spec, shared, emission, d, v);
      const std::string rel = domains[d]->domain_id + "/" + seq.id + ".sfm";
      try {
        write_sequence(out / rel, seq);
      } catch (const std::exception& e) {
        throw FormatError("failed to write " + (out / rel).string() + ": " + e.what());
      }
      entries.push_back({seq.id, domains[d]->domain_id, splits[v], rel, seq.length()});
      manifest += seq.id + "\t" + domains[d]->domain_id + "\t" + to_string(splits[v]) + "\t" + rel + "\t" +
                  std::to_string(seq.length()) + "\n";
    }
  }
  io::write_text_atomic(out / kManifestName, manifest);
  io::write_text_atomic(out / kBenchmarkSpecName, format_benchmark_spec(spec));
  return entries;
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / kManifestName;
  std::ifstream in(path);
  if (!in) throw FormatError("missing benchmark manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::size_t pos = 0;
    while (true) {
      const auto tab = line.find('\t', pos);
      cols.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (cols.size() != 5) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 5 columns");
    ManifestEntry e{cols[0], cols[1], parse_split(cols[2]), cols[3], 0};
    try {
      e.length = std::stoul(cols[4]);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad length '" + cols[4] + "'");
    }
    out.push_back(std::move(e));
  }
  return out;
}

/// A generated benchmark on disk.
class Benchmark {
 public:
  explicit Benchmark(std::filesystem::path dir) : dir_(std::move(dir)), entries_(read_manifest(dir_)) {}

  [[nodiscard]] const std::filesystem::path& dir() const { return dir_; }
  [[nodiscard]] const std::vector<ManifestEntry>& entries() const { return entries_; }

  /// Domains in manifest order; the first is the source.
  [[nodiscard]] std::vector<std::string> domains() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) {
      if (std::find(out.begin(), out.end(), e.domain) == out.end()) out.push_back(e.domain);
    }
    return out;
  }

  [[nodiscard]] std::vector<ManifestEntry> select(const std::string& domain, Split split) const {
    std::vector<ManifestEntry> out;
    for (const auto& e : entries_) {
      if (e.domain == domain && e.split == split) out.push_back(e);
    }
    return out;
  }

  [[nodiscard]] Dataset load(const std::vector<ManifestEntry>& which) const {
    Dataset out;
    out.reserve(which.size());
    for (const auto& e : which) {
      auto seq = read_sequence(dir_ / e.path);
      seq.id = e.id;
      if (seq.length() != e.length) {
        throw FormatError(e.path + ": manifest length " + std::to_string(e.length) + " differs from file length " +
                          std::to_string(seq.length()));
      }
      out.push_back(std::move(seq));
    }
    return out;
  }

  [[nodiscard]] Dataset load(const std::string& domain, Split split) const { return load(select(domain, split)); }

 private:
  std::filesystem::path dir_;
  std::vector<ManifestEntry> entries_;
};

}  // namespace tsan_lab
