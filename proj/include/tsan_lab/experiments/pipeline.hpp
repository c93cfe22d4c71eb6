// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The tsan-lab Authors
 *
 * @file   pipeline.hpp
 * @brief  Training stages with on-disk caching, the metrics CSV and a
 *         small worker pool for harness cells.
 *
 * A stage is one pretraining or supervised run on one domain. Stages form
 * chains through their parent (the initialization source). Each stage is
 * identified by a hash of its canonical key text, which covers the
 * benchmark fingerprint, every setting and the parent key, so a cached
 * result can be reused by any harness that asks for the same stage.
 */
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "tsan_lab/config.hpp"
#include "tsan_lab/data/synthetic.hpp"
#include "tsan_lab/experiments/checkpoint.hpp"
#include "tsan_lab/experiments/metrics.hpp"
#include "tsan_lab/experiments/run_config.hpp"
#include "tsan_lab/seso/seso.hpp"
#include "tsan_lab/training/training.hpp"

namespace tsan_lab {

// ---------------------------------------------------------------- hashing

inline std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------- files

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes through a uniquely named temporary and renames it into place.
inline void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  static std::atomic<std::uint64_t> counter{0};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp" + std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------- metrics CSV

inline constexpr std::string_view kMetricsHeader = "run_id,domain,arch,init,seed,epoch,split,metric,value";

struct MetricRow {
  std::string run_id;
  std::string domain;
  std::string arch;
  std::string init;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::string split;
  std::string metric;
  double value = 0.0;

  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

inline std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out(kMetricsHeader);
  out += '\n';
  auto field = [&](const std::string& s) {
    if (s.find_first_of(",\n") != std::string::npos) throw ConfigError("metrics field contains a separator: " + s);
    out += s;
    out += ',';
  };
  for (const auto& r : rows) {
    field(r.run_id);
    field(r.domain);
    field(r.arch);
    field(r.init);
    field(std::to_string(r.seed));
    field(std::to_string(r.epoch));
    field(r.split);
    field(r.metric);
    out += format_double(r.value);
    out += '\n';
  }
  return out;
}

inline std::vector<MetricRow> parse_metrics_csv(std::string_view text, const std::string& origin = "metrics") {
  std::vector<MetricRow> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw FormatError(origin + ": missing metrics header");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
    if (cols.size() != 9) throw FormatError(origin + ":" + std::to_string(line_no) + ": expected 9 columns");
    MetricRow r;
    r.run_id = cols[0];
    r.domain = cols[1];
    r.arch = cols[2];
    r.init = cols[3];
    try {
      r.seed = std::stoull(cols[4]);
      r.epoch = std::stoull(cols[5]);
      r.value = std::stod(cols[8]);
    } catch (const std::exception&) {
      throw FormatError(origin + ":" + std::to_string(line_no) + ": malformed number");
    }
    r.split = cols[6];
    r.metric = cols[7];
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Seven comma-separated lines of counts, rows = true step.
inline std::string confusion_csv(const ConfusionMatrix& m) {
  std::string out;
  for (const auto& row : m.counts) {
    for (std::size_t j = 0; j < row.size(); ++j) out += (j ? "," : "") + std::to_string(row[j]);
    out += '\n';
  }
  return out;
}

inline ConfusionMatrix parse_confusion_csv(std::string_view text, const std::string& origin = "confusion") {
  ConfusionMatrix m;
  std::istringstream in{std::string(text)};
  std::string line;
  for (std::size_t i = 0; i < kNumSteps; ++i) {
    if (!std::getline(in, line)) throw FormatError(origin + ": expected 7 lines");
    std::stringstream ss(line);
    std::string c;
    for (std::size_t j = 0; j < kNumSteps; ++j) {
      if (!std::getline(ss, c, ',')) throw FormatError(origin + ": expected 7 columns");
      try {
        m.counts[i][j] = std::stoull(c);
      } catch (const std::exception&) {
        throw FormatError(origin + ": malformed count");
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------- workers

/// TSAN_LAB_THREADS, or the hardware concurrency, capped by `tasks`.
inline std::size_t worker_count(std::size_t tasks) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("TSAN_LAB_THREADS"); env && *env) {
    ConfigReader r(ConfigMap{{"TSAN_LAB_THREADS", env}}, "environment");
    n = r.get_uint("TSAN_LAB_THREADS", 1);
    if (n == 0) throw ConfigError("TSAN_LAB_THREADS must be positive");
  }
  return std::max<std::size_t>(1, std::min(n, tasks));
}

/// Runs f(0..n-1) on `threads` workers; the first exception is rethrown.
template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& f) {
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------- settings

/// Settings shared by every stage of a harness; architecture fields are
/// filled in per grid row.
struct HarnessSettings {
  ModelConfig model;
  TrainConfig train;
  SesoConfig seso;
};

inline HarnessSettings read_harness_settings(ConfigReader& cfg, HarnessSettings base = {}) {
  for (const char* k : {"arch", "input_dim", "lstm_layers", "num_classes", "seed"}) {
    if (cfg.has(k)) throw ConfigError(std::string("'") + k + "' is fixed by the harness and may not be configured");
  }
  HarnessSettings s = base;
  if (cfg.has("kernel_sizes")) {
    const auto ks = cfg.get_uint_list("kernel_sizes", {});
    s.model.kernel_sizes.assign(ks.begin(), ks.end());
  }
  s.model.hidden = cfg.get_uint("hidden", s.model.hidden);
  s.model.dropout_rate = cfg.get_double("dropout_rate", s.model.dropout_rate);
  s.train = read_train_config(cfg, s.train);
  s.seso = read_seso_config(cfg, s.seso);
  s.model.validate();
  return s;
}

inline ConfigMap harness_settings_map(const HarnessSettings& s) {
  ConfigMap m = train_config_map(s.train);
  m.erase("seed");
  for (auto& [k, v] : seso_config_map(s.seso)) m[k] = v;
  m["hidden"] = std::to_string(s.model.hidden);
  m["kernel_sizes"] = join_sizes(s.model.kernel_sizes);
  return m;
}

// ---------------------------------------------------------------- stages

enum class StageKind { seso, step };

struct StageSpec {
  StageKind kind = StageKind::step;
  std::string arch_label;
  ModelConfig model;
  std::string domain;
  /// Training ids in manifest order; empty means the whole training split.
  std::vector<std::string> subset;
  std::shared_ptr<const StageSpec> parent;
  std::uint64_t seed = 0;
};

using StagePtr = std::shared_ptr<const StageSpec>;

inline StagePtr seso_stage(std::string arch_label, ModelConfig mc, std::string domain, std::uint64_t seed) {
  return std::make_shared<const StageSpec>(
      StageSpec{StageKind::seso, std::move(arch_label), std::move(mc), std::move(domain), {}, nullptr, seed});
}

inline StagePtr step_stage(std::string arch_label, ModelConfig mc, std::string domain, std::uint64_t seed,
                           StagePtr parent = nullptr, std::vector<std::string> subset = {}) {
  return std::make_shared<const StageSpec>(StageSpec{StageKind::step, std::move(arch_label), std::move(mc),
                                                     std::move(domain), std::move(subset), std::move(parent), seed});
}

/// "random", "seso(source)", "seso(source)>step(source)", ...
inline std::string init_label(const StageSpec& s) {
  if (!s.parent) return "random";
  const std::string here = std::string(s.parent->kind == StageKind::seso ? "seso(" : "step(") + s.parent->domain + ")";
  const std::string before = init_label(*s.parent);
  return before == "random" ? (s.parent->kind == StageKind::seso ? here : "random>" + here) : before + ">" + here;
}

inline std::uint64_t stage_seed(const StageSpec& s) {
  return derive_seed(s.seed, fnv1a(std::string(s.kind == StageKind::seso ? "seso:" : "step:") + s.domain));
}

/// Result of one stage. The trained weights stay in the cache directory.
struct StageOutput {
  std::string run_id;
  std::vector<MetricRow> rows;
  double test_accuracy = std::numeric_limits<double>::quiet_NaN();
  ConfusionMatrix confusion;
  std::filesystem::path checkpoint_path;

  /// Values of one metric in epoch order.
  [[nodiscard]] std::vector<double> curve(std::string_view split, std::string_view metric) const {
    std::vector<double> out;
    for (const auto& r : rows) {
      if (r.split == split && r.metric == metric) out.push_back(r.value);
    }
    return out;
  }
};

using StageResult = std::shared_ptr<const StageOutput>;

class Pipeline {
 public:
  Pipeline(std::filesystem::path benchmark_dir, HarnessSettings settings, std::filesystem::path cache_dir,
           bool verbose = true)
      : bench_(std::move(benchmark_dir)), settings_(std::move(settings)), cache_(std::move(cache_dir)),
        verbose_(verbose) {
    if (bench_.entries().empty()) throw FormatError(bench_.dir().string() + ": empty manifest");
    std::string fp = read_text_file(bench_.dir() / kManifestName);
    if (std::filesystem::exists(bench_.dir() / kBenchmarkSpecName)) fp += read_text_file(bench_.dir() / kBenchmarkSpecName);
    fingerprint_ = hex64(fnv1a(fp));
    const auto first = bench_.load({bench_.entries().front()});
    input_dim_ = first.front().width();
    std::filesystem::create_directories(cache_);
  }

  [[nodiscard]] const Benchmark& benchmark() const { return bench_; }
  [[nodiscard]] const HarnessSettings& settings() const { return settings_; }
  [[nodiscard]] std::size_t input_dim() const { return input_dim_; }
  [[nodiscard]] const std::filesystem::path& cache_dir() const { return cache_; }

  /// Shared settings specialized to one architecture.
  [[nodiscard]] ModelConfig model(ArchKind kind, std::vector<std::size_t> kernels = {}, std::size_t layers = 1) const {
    ModelConfig mc = settings_.model;
    mc.kind = kind;
    mc.input_dim = input_dim_;
    mc.lstm_layers = layers;
    if (!kernels.empty()) mc.kernel_sizes = std::move(kernels);
    mc.validate();
    return mc;
  }

  [[nodiscard]] std::string key_text(const StageSpec& s) const {
    ConfigMap m = model_config_map(s.model);
    TrainConfig tc = settings_.train;
    tc.seed = stage_seed(s);
    for (auto& [k, v] : train_config_map(tc)) m["train." + k] = v;
    if (s.kind == StageKind::seso) {
      for (auto& [k, v] : seso_config_map(settings_.seso)) m[k] = v;
    }
    m["stage"] = s.kind == StageKind::seso ? "seso" : "step";
    m["benchmark"] = fingerprint_;
    m["domain"] = s.domain;
    std::string subset;
    for (const auto& id : s.subset) subset += (subset.empty() ? "" : ",") + id;
    m["subset"] = subset.empty() ? "*" : subset;
    m["parent"] = s.parent ? run_id(*s.parent) : "none";
    return format_config(m);
  }

  [[nodiscard]] std::string run_id(const StageSpec& s) const { return hex64(fnv1a(key_text(s))); }

  /// Manifest paths read by a stage and all its ancestors.
  [[nodiscard]] std::vector<std::string> inputs(const StageSpec& s) const {
    std::vector<std::string> out = s.parent ? inputs(*s.parent) : std::vector<std::string>{};
    auto add = [&](Split split) {
      for (const auto& e : bench_.select(s.domain, split)) {
        if (split == Split::train && !s.subset.empty() &&
            std::find(s.subset.begin(), s.subset.end(), e.id) == s.subset.end()) {
          continue;
        }
        out.push_back(e.path);
      }
    };
    add(Split::train);
    add(Split::val);
    if (s.kind == StageKind::step) add(Split::test);
    return out;
  }

  /// Runs a stage (and its ancestors), reusing in-flight and cached results.
  StageResult run(const StagePtr& spec) {
    const std::string key = key_text(*spec);
    const std::string id = hex64(fnv1a(key));
    std::promise<StageResult> promise;
    std::shared_future<StageResult> future;
    bool owner = false;
    {
      std::lock_guard lock(mu_);
      auto it = inflight_.find(id);
      if (it == inflight_.end()) {
        future = promise.get_future().share();
        inflight_.emplace(id, future);
        owner = true;
      } else {
        future = it->second;
      }
    }
    if (owner) {
      try {
        promise.set_value(load_or_compute(*spec, key, id));
      } catch (...) {
        promise.set_exception(std::current_exception());
      }
    }
    return future.get();
  }

  /// Metric rows of the given stages and their ancestors, ancestors first,
  /// each stage once.
  std::vector<MetricRow> collect_rows(const std::vector<StagePtr>& finals) {
    std::vector<MetricRow> out;
    std::set<std::string> seen;
    std::function<void(const StagePtr&)> visit = [&](const StagePtr& s) {
      if (s->parent) visit(s->parent);
      const auto r = run(s);
      if (!seen.insert(r->run_id).second) return;
      out.insert(out.end(), r->rows.begin(), r->rows.end());
    };
    for (const auto& s : finals) visit(s);
    return out;
  }

  Dataset dataset(const std::string& domain, Split split) {
    std::lock_guard lock(data_mu_);
    const std::string key = domain + "/" + to_string(split);
    auto it = data_.find(key);
    if (it == data_.end()) {
      Dataset d = bench_.load(domain, split);
      if (d.empty()) throw FormatError(bench_.dir().string() + ": no " + to_string(split) + " videos for " + domain);
      it = data_.emplace(key, std::make_shared<const Dataset>(std::move(d))).first;
    }
    return *it->second;
  }

 private:
  StageResult load_or_compute(const StageSpec& s, const std::string& key, const std::string& id) {
    const auto base = cache_ / id;
    const auto key_path = std::filesystem::path(base.string() + ".key");
    const auto ck_path = std::filesystem::path(base.string() + ".tsck");
    const auto csv_path = std::filesystem::path(base.string() + ".csv");
    const auto conf_path = std::filesystem::path(base.string() + ".confusion");
    auto out = std::make_shared<StageOutput>();
    out->run_id = id;
    out->checkpoint_path = ck_path;
    if (std::filesystem::exists(key_path) && read_text_file(key_path) == key && std::filesystem::exists(ck_path) &&
        std::filesystem::exists(csv_path) && std::filesystem::exists(conf_path)) {
      out->rows = parse_metrics_csv(read_text_file(csv_path), csv_path.string());
      out->confusion = parse_confusion_csv(read_text_file(conf_path), conf_path.string());
      for (const auto& r : out->rows) {
        if (r.split == "test" && r.metric == "accuracy") out->test_accuracy = r.value;
      }
      return out;
    }

    // Parents first, outside of any lock.
    StageResult parent = s.parent ? run(s.parent) : nullptr;
    const auto start = std::chrono::steady_clock::now();
    TrainConfig tc = settings_.train;
    tc.seed = stage_seed(s);
    tc.dropout_rate = s.model.dropout_rate;
    Dataset train = dataset(s.domain, Split::train);
    if (!s.subset.empty()) {
      Dataset picked;
      for (const auto& seq : train) {
        if (std::find(s.subset.begin(), s.subset.end(), seq.id) != s.subset.end()) picked.push_back(seq);
      }
      if (picked.size() != s.subset.size()) throw FormatError("subset names videos missing from " + s.domain);
      train = std::move(picked);
    }
    const Dataset val = dataset(s.domain, Split::val);
    auto row = [&](std::size_t epoch, std::string split, std::string metric, double v) {
      out->rows.push_back({id, s.domain, s.arch_label, init_label(s), s.seed, epoch, std::move(split),
                           std::move(metric), v});
    };

    Checkpoint ck;
    if (s.kind == StageKind::seso) {
      const SesoResult r = pretrain_seso(train, val, s.model, tc, settings_.seso);
      for (const auto& e : r.history.epochs) {
        row(e.epoch, "train", "sorting_loss", e.train_loss);
        row(e.epoch, "val", "sorting_accuracy", e.val_accuracy);
      }
      ck = r.checkpoint();
    } else {
      std::pair<StepModel, History> trained;
      if (!parent) {
        trained = train_step_model(train, val, s.model, tc, TrainInit::random(tc.seed));
      } else if (s.parent->kind == StageKind::seso) {
        trained = finetune_from_seso(load_checkpoint(parent->checkpoint_path), train, val, s.model, tc);
      } else {
        trained = train_model(restore_step_model(load_checkpoint(parent->checkpoint_path), s.model), train, val, tc);
      }
      for (const auto& e : trained.second.epochs) {
        row(e.epoch, "train", "loss", e.train_loss);
        row(e.epoch, "val", "accuracy", e.val_accuracy);
      }
      const MetricsReport report = evaluate(trained.first, dataset(s.domain, Split::test));
      row(trained.second.selected_epoch, "test", "accuracy", report.pooled_accuracy);
      out->test_accuracy = report.pooled_accuracy;
      out->confusion = report.confusion;
      ck = make_checkpoint(trained.first);
    }
    save_checkpoint(ck_path, ck);
    write_text_atomic(csv_path, metrics_csv(out->rows));
    write_text_atomic(conf_path, confusion_csv(out->confusion));
    write_text_atomic(key_path, key);
    if (verbose_) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::ostringstream msg;
      msg << "[" << id.substr(0, 8) << "] " << (s.kind == StageKind::seso ? "seso " : "step ") << s.arch_label << " "
          << s.domain << " seed " << s.seed << " init " << init_label(s);
      if (s.kind == StageKind::step) msg << " test " << format_double(out->test_accuracy);
      msg << " (" << static_cast<long long>(secs) << " s)\n";
      std::lock_guard lock(log_mu_);
      std::cerr << msg.str();
    }
    return out;
  }

  Benchmark bench_;
  HarnessSettings settings_;
  std::filesystem::path cache_;
  bool verbose_;
  std::string fingerprint_;
  std::size_t input_dim_ = 0;
  std::mutex mu_;
  std::map<std::string, std::shared_future<StageResult>> inflight_;
  std::mutex data_mu_;
  std::map<std::string, std::shared_ptr<const Dataset>> data_;
  std::mutex log_mu_;
};

}  // namespace tsan_lab
