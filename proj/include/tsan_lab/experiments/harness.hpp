// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The tsan-lab Authors
 *
 * @file   harness.hpp
 * @brief  Architecture grid, training-set-size sweep and the sorting
 *         source-versus-target study, with their table writers.
 *
 * Transfer chains:
 *
 *   baseline row     random -> step(target)
 *   transfer row     random -> step(source) -> step(target)
 *   +seso row        seso(source) -> step(source) -> step(target)
 *   sorting study    seso(source | target) -> step(target)
 */
#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tsan_lab/experiments/pipeline.hpp"

namespace tsan_lab {

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

/// Left-aligned first column, right-aligned others, two spaces apart.
inline std::string aligned_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      const std::string pad(width[c] - r[c].size(), ' ');
      if (c) line += "  ";
      line += c == 0 ? r[c] + pad : pad + r[c];
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
  }
  return out;
}

inline std::vector<std::uint64_t> seed_list(std::size_t count) {
  if (count == 0) throw ConfigError("at least one seed is required");
  std::vector<std::uint64_t> s(count);
  for (std::size_t i = 0; i < count; ++i) s[i] = i;
  return s;
}

inline std::vector<std::string> target_domains(const Benchmark& b) {
  auto d = b.domains();
  if (d.size() < 2) throw FormatError(b.dir().string() + ": benchmark needs a source and at least one target");
  d.erase(d.begin());
  return d;
}

// ---------------------------------------------------------------- grid

struct GridRow {
  std::string name;
  std::string arch;  // metrics label
  ArchKind kind = ArchKind::tsan;
  std::vector<std::size_t> kernels;  // empty keeps the configured sizes
  std::size_t layers = 1;
  bool seso = false;
  bool transfer = true;
};

inline std::vector<GridRow> default_grid() {
  return {
      {"lstm1-baseline", "lstm1", ArchKind::lstm, {}, 1, false, false},
      {"conv1d-k5", "conv1d-k5", ArchKind::conv1d, {5}, 1, false, true},
      {"conv1d-k25", "conv1d-k25", ArchKind::conv1d, {25}, 1, false, true},
      {"conv1d-k39", "conv1d-k39", ArchKind::conv1d, {39}, 1, false, true},
      {"conv-ensemble", "conv-ensemble", ArchKind::conv_ensemble, {5, 25, 39}, 1, false, true},
      {"lstm1", "lstm1", ArchKind::lstm, {}, 1, false, true},
      {"lstm1+seso", "lstm1", ArchKind::lstm, {}, 1, true, true},
      {"lstm2", "lstm2", ArchKind::lstm, {}, 2, false, true},
      {"lstm2+seso", "lstm2", ArchKind::lstm, {}, 2, true, true},
      {"tsan", "tsan", ArchKind::tsan, {}, 1, false, true},
      {"tsan+seso", "tsan", ArchKind::tsan, {}, 1, true, true},
  };
}

/// Rows of the default grid by name, in the order given.
inline std::vector<GridRow> select_grid(const std::vector<std::string>& names) {
  const auto all = default_grid();
  std::vector<GridRow> out;
  for (const auto& n : names) {
    auto it = std::find_if(all.begin(), all.end(), [&](const GridRow& r) { return r.name == n; });
    if (it == all.end()) throw ConfigError("unknown grid row '" + n + "'");
    out.push_back(*it);
  }
  if (out.empty()) throw ConfigError("empty grid");
  return out;
}

inline std::vector<std::string> grid_names(const std::vector<GridRow>& grid) {
  std::vector<std::string> out;
  for (const auto& r : grid) out.push_back(r.name);
  return out;
}

/// Final stage of one grid row on one target.
inline StagePtr grid_stage(const Pipeline& p, const GridRow& row, const std::string& target, std::uint64_t seed,
                           std::vector<std::string> subset = {}) {
  const ModelConfig mc = p.model(row.kind, row.kernels, row.layers);
  if (!row.transfer) return step_stage(row.arch, mc, target, seed, nullptr, std::move(subset));
  const std::string source = p.benchmark().domains().front();
  StagePtr init = row.seso ? seso_stage(row.arch, mc, source, seed) : nullptr;
  StagePtr src = step_stage(row.arch, mc, source, seed, std::move(init));
  return step_stage(row.arch, mc, target, seed, std::move(src), std::move(subset));
}

struct Cell {
  std::string row;
  std::string target;
  std::uint64_t seed = 0;
  StagePtr stage;
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  std::string run_id;
};

inline void run_cells(Pipeline& p, std::vector<Cell>& cells) {
  parallel_for(cells.size(), worker_count(cells.size()), [&](std::size_t i) {
    const auto r = p.run(cells[i].stage);
    cells[i].accuracy = r->test_accuracy;
    cells[i].confusion = r->confusion;
    cells[i].run_id = r->run_id;
  });
}

inline std::vector<StagePtr> cell_stages(const std::vector<Cell>& cells) {
  std::vector<StagePtr> out;
  for (const auto& c : cells) out.push_back(c.stage);
  return out;
}

/// Confusion blocks: a '#' line naming the cell, then seven count lines.
inline std::string confusion_blocks(const std::vector<Cell>& cells, const std::string& label_key = "row") {
  std::string out;
  for (const auto& c : cells) {
    out += "# " + label_key + "=" + c.row + " target=" + c.target + " seed=" + std::to_string(c.seed) +
           " run_id=" + c.run_id + "\n";
    out += confusion_csv(c.confusion);
  }
  return out;
}

struct Table2Result {
  std::vector<std::string> rows;
  std::vector<std::string> targets;
  std::vector<std::uint64_t> seeds;
  std::vector<Cell> cells;

  [[nodiscard]] const Cell& cell(const std::string& row, const std::string& target, std::uint64_t seed) const {
    for (const auto& c : cells) {
      if (c.row == row && c.target == target && c.seed == seed) return c;
    }
    throw IndexError("no table cell " + row + "/" + target + "/" + std::to_string(seed));
  }
  [[nodiscard]] double avg(const std::string& row, std::uint64_t seed) const {
    double s = 0.0;
    for (const auto& t : targets) s += cell(row, t, seed).accuracy;
    return s / static_cast<double>(targets.size());
  }
  [[nodiscard]] double median_avg(const std::string& row) const {
    std::vector<double> v;
    for (auto s : seeds) v.push_back(avg(row, s));
    return median(v);
  }
  [[nodiscard]] double median_accuracy(const std::string& row, const std::string& target) const {
    std::vector<double> v;
    for (auto s : seeds) v.push_back(cell(row, target, s).accuracy);
    return median(v);
  }
};

inline Table2Result table2_harness(Pipeline& p, const std::vector<GridRow>& grid, const std::vector<std::uint64_t>& seeds) {
  Table2Result r{grid_names(grid), target_domains(p.benchmark()), seeds, {}};
  for (const auto& row : grid)
    for (auto seed : seeds)
      for (const auto& t : r.targets) r.cells.push_back({row.name, t, seed, grid_stage(p, row, t, seed), 0.0, {}, {}});
  run_cells(p, r.cells);
  return r;
}

inline std::string table2_csv(const Table2Result& r) {
  std::string out = "row,seed";
  for (const auto& t : r.targets) out += "," + t;
  out += ",avg\n";
  for (const auto& row : r.rows) {
    for (auto s : r.seeds) {
      out += row + "," + std::to_string(s);
      for (const auto& t : r.targets) out += "," + format_double(r.cell(row, t, s).accuracy);
      out += "," + format_double(r.avg(row, s)) + "\n";
    }
    out += row + ",median";
    for (const auto& t : r.targets) out += "," + format_double(r.median_accuracy(row, t));
    out += "," + format_double(r.median_avg(row)) + "\n";
  }
  return out;
}

inline std::string table2_text(const Table2Result& r) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{"model"};
  for (const auto& t : r.targets) head.push_back(t);
  head.push_back("AVG");
  rows.push_back(head);
  for (const auto& row : r.rows) {
    std::vector<std::string> line{row};
    for (const auto& t : r.targets) line.push_back(percent(r.median_accuracy(row, t)));
    line.push_back(percent(r.median_avg(row)));
    rows.push_back(line);
  }
  return "Step accuracy (%), median over " + std::to_string(r.seeds.size()) + " seed(s)\n" + aligned_table(rows);
}

// ---------------------------------------------------------------- sweep

/// A requested training-set size; nullopt means the whole split.
using SweepSize = std::optional<std::size_t>;

inline std::string size_label(const SweepSize& s) { return s ? std::to_string(*s) : "all"; }

inline std::vector<SweepSize> parse_sizes(const std::string& text) {
  std::vector<SweepSize> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t(detail::trim(item));
    if (t == "all") {
      out.emplace_back(std::nullopt);
      continue;
    }
    ConfigReader r(ConfigMap{{"sizes", t}}, "sizes");
    const auto v = r.get_uint("sizes", 0);
    if (v == 0) throw ConfigError("sizes must be positive");
    out.emplace_back(v);
  }
  if (out.empty()) throw ConfigError("empty size list");
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (!out[i - 1] || (out[i] && *out[i] <= *out[i - 1])) throw ConfigError("sizes must be strictly ascending");
  }
  return out;
}

/**
 * First `k` ids of a seeded shuffle, returned in their original order. For a
 * fixed seed the subsets for increasing k are nested.
 */
inline std::vector<std::string> nested_subset(const std::vector<std::string>& ids, std::size_t k, std::uint64_t seed) {
  if (k > ids.size()) {
    throw ConfigError("size " + std::to_string(k) + " exceeds the " + std::to_string(ids.size()) +
                      " available training videos");
  }
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(k);
  std::sort(order.begin(), order.end());
  std::vector<std::string> out;
  for (auto i : order) out.push_back(ids[i]);
  return out;
}

struct SweepCell {
  std::string target;
  std::string variant;
  std::string size;  // as requested
  std::size_t effective_size = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> subset;  // ids actually used
  StagePtr stage;
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  std::string run_id;
};

struct SweepResult {
  std::vector<std::string> targets;
  std::vector<std::string> variants;
  std::vector<std::string> sizes;
  std::vector<std::uint64_t> seeds;
  std::vector<SweepCell> cells;

  [[nodiscard]] const SweepCell& cell(const std::string& target, const std::string& variant, const std::string& size,
                                      std::uint64_t seed) const {
    for (const auto& c : cells) {
      if (c.target == target && c.variant == variant && c.size == size && c.seed == seed) return c;
    }
    throw IndexError("no sweep cell " + target + "/" + variant + "/" + size);
  }
  [[nodiscard]] double median_accuracy(const std::string& target, const std::string& variant,
                                       const std::string& size) const {
    std::vector<double> v;
    for (auto s : seeds) v.push_back(cell(target, variant, size, s).accuracy);
    return median(v);
  }
};

inline std::vector<std::string> sweep_variants() { return {"lstm1+seso", "tsan+seso"}; }

/**
 * Sizes larger than a target's training split raise ConfigError unless
 * `clamp_oversize` is set, in which case they fall back to the whole split
 * and the effective size is reported.
 */
inline SweepResult size_sweep(Pipeline& p, const std::vector<std::string>& targets, const std::vector<SweepSize>& sizes,
                              const std::vector<std::uint64_t>& seeds, bool clamp_oversize,
                              const std::vector<std::string>& variants = sweep_variants()) {
  SweepResult r{targets, variants, {}, seeds, {}};
  for (const auto& s : sizes) r.sizes.push_back(size_label(s));
  const auto grid = select_grid(variants);
  for (const auto& t : targets) {
    std::vector<std::string> ids;
    for (const auto& e : p.benchmark().select(t, Split::train)) ids.push_back(e.id);
    if (ids.empty()) throw FormatError("no training videos for " + t);
    for (const auto& row : grid) {
      for (auto seed : seeds) {
        const std::uint64_t subset_seed = derive_seed(seed, fnv1a("subset:" + t));
        for (const auto& s : sizes) {
          std::size_t k = s ? *s : ids.size();
          if (k > ids.size()) {
            if (!clamp_oversize) nested_subset(ids, k, subset_seed);
            std::cerr << "note: size " << k << " exceeds " << ids.size() << " training videos in " << t
                      << "; using all\n";
            k = ids.size();
          }
          auto subset = nested_subset(ids, k, subset_seed);
          SweepCell c{t, row.name, size_label(s), k, seed, subset, nullptr, 0.0, {}, {}};
          c.stage = grid_stage(p, row, t, seed, k == ids.size() ? std::vector<std::string>{} : std::move(subset));
          r.cells.push_back(std::move(c));
        }
      }
    }
  }
  std::vector<Cell> plain;
  for (const auto& c : r.cells) plain.push_back({c.variant, c.target, c.seed, c.stage, 0.0, {}, {}});
  run_cells(p, plain);
  for (std::size_t i = 0; i < plain.size(); ++i) {
    r.cells[i].accuracy = plain[i].accuracy;
    r.cells[i].confusion = plain[i].confusion;
    r.cells[i].run_id = plain[i].run_id;
  }
  return r;
}

inline std::string sweep_csv(const SweepResult& r) {
  std::string out = "target,variant,size,effective_size,seed,accuracy\n";
  for (const auto& t : r.targets)
    for (const auto& v : r.variants)
      for (const auto& s : r.sizes) {
        for (auto seed : r.seeds) {
          const auto& c = r.cell(t, v, s, seed);
          out += t + "," + v + "," + s + "," + std::to_string(c.effective_size) + "," + std::to_string(seed) + "," +
                 format_double(c.accuracy) + "\n";
        }
        out += t + "," + v + "," + s + "," + std::to_string(r.cell(t, v, s, r.seeds.front()).effective_size) +
               ",median," + format_double(r.median_accuracy(t, v, s)) + "\n";
      }
  return out;
}

inline std::string sweep_text(const SweepResult& r) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{"target / variant"};
  for (const auto& s : r.sizes) head.push_back("n=" + s);
  rows.push_back(head);
  for (const auto& t : r.targets)
    for (const auto& v : r.variants) {
      std::vector<std::string> line{t + " / " + v};
      for (const auto& s : r.sizes) line.push_back(percent(r.median_accuracy(t, v, s)));
      rows.push_back(line);
    }
  return "Step accuracy (%) by training-set size, median over " + std::to_string(r.seeds.size()) + " seed(s)\n" +
         aligned_table(rows);
}

// ---------------------------------------------------------------- sorting study

struct SesoCurve {
  std::string domain;
  std::uint64_t seed = 0;
  std::vector<double> val_accuracy;  // per epoch

  /// First 1-based epoch reaching `threshold`, or epochs + 1 if never.
  [[nodiscard]] std::size_t epochs_to(double threshold) const {
    for (std::size_t e = 0; e < val_accuracy.size(); ++e) {
      if (val_accuracy[e] >= threshold) return e + 1;
    }
    return val_accuracy.size() + 1;
  }
};

struct Table3Result {
  std::vector<std::string> targets;
  std::vector<std::string> seso_domains;  // source first, then targets
  std::vector<std::uint64_t> seeds;
  std::vector<Cell> cells;  // row = pretraining domain
  std::vector<SesoCurve> curves;
  std::string smallest_target;

  [[nodiscard]] const Cell& cell(const std::string& target, const std::string& seso_domain, std::uint64_t seed) const {
    for (const auto& c : cells) {
      if (c.target == target && c.row == seso_domain && c.seed == seed) return c;
    }
    throw IndexError("no table cell " + seso_domain + "/" + target);
  }
  [[nodiscard]] double median_accuracy(const std::string& target, const std::string& seso_domain) const {
    std::vector<double> v;
    for (auto s : seeds) v.push_back(cell(target, seso_domain, s).accuracy);
    return median(v);
  }
  [[nodiscard]] double median_epochs_to(const std::string& domain, double threshold) const {
    std::vector<double> v;
    for (const auto& c : curves) {
      if (c.domain == domain) v.push_back(static_cast<double>(c.epochs_to(threshold)));
    }
    return median(v);
  }
};

inline Table3Result table3_harness(Pipeline& p, const std::vector<std::uint64_t>& seeds) {
  Table3Result r;
  r.targets = target_domains(p.benchmark());
  r.seeds = seeds;
  const std::string source = p.benchmark().domains().front();
  r.seso_domains.push_back(source);
  r.seso_domains.insert(r.seso_domains.end(), r.targets.begin(), r.targets.end());
  r.smallest_target = r.targets.front();
  for (const auto& t : r.targets) {
    if (p.benchmark().select(t, Split::train).size() < p.benchmark().select(r.smallest_target, Split::train).size()) {
      r.smallest_target = t;
    }
  }
  const ModelConfig mc = p.model(ArchKind::tsan);
  for (const auto& t : r.targets)
    for (const auto& pre : {source, t})
      for (auto seed : seeds) r.cells.push_back({pre, t, seed, step_stage("tsan", mc, t, seed, seso_stage("tsan", mc, pre, seed)), 0.0, {}, {}});
  run_cells(p, r.cells);
  for (const auto& d : r.seso_domains)
    for (auto seed : seeds) r.curves.push_back({d, seed, p.run(seso_stage("tsan", mc, d, seed))->curve("val", "sorting_accuracy")});
  return r;
}

inline std::vector<StagePtr> table3_stages(const Pipeline& p, const Table3Result& r) {
  auto out = cell_stages(r.cells);
  const ModelConfig mc = p.model(ArchKind::tsan);
  for (const auto& c : r.curves) out.push_back(seso_stage("tsan", mc, c.domain, c.seed));
  return out;
}

inline std::string table3_csv(const Table3Result& r) {
  std::string out = "target,seso_domain,seed,accuracy\n";
  for (const auto& t : r.targets)
    for (const auto& pre : {r.seso_domains.front(), t}) {
      for (auto s : r.seeds) out += t + "," + pre + "," + std::to_string(s) + "," + format_double(r.cell(t, pre, s).accuracy) + "\n";
      out += t + "," + pre + ",median," + format_double(r.median_accuracy(t, pre)) + "\n";
    }
  return out;
}

inline std::string table3_text(const Table3Result& r) {
  std::vector<std::vector<std::string>> rows{{"target", "sorting pretrained on", "accuracy"}};
  for (const auto& t : r.targets)
    for (const auto& pre : {r.seso_domains.front(), t}) rows.push_back({t, pre, percent(r.median_accuracy(t, pre))});
  std::vector<std::vector<std::string>> conv{{"domain", "epochs to 50% sorting accuracy"}};
  for (const auto& d : r.seso_domains) conv.push_back({d, format_double(r.median_epochs_to(d, 0.5))});
  return "Step accuracy (%), median over " + std::to_string(r.seeds.size()) + " seed(s)\n" + aligned_table(rows) +
         "\nSorting convergence, median over seeds (epochs + 1 means never)\n" + aligned_table(conv);
}

inline std::string seso_curves_csv(const Table3Result& r) {
  std::string out = "domain,seed,epoch,val_sorting_accuracy\n";
  for (const auto& c : r.curves)
    for (std::size_t e = 0; e < c.val_accuracy.size(); ++e)
      out += c.domain + "," + std::to_string(c.seed) + "," + std::to_string(e + 1) + "," + format_double(c.val_accuracy[e]) + "\n";
  return out;
}

inline std::string seso_convergence_csv(const Table3Result& r, double threshold = 0.5) {
  std::string out = "domain,seed,epochs_to_threshold\n";
  for (const auto& d : r.seso_domains) {
    for (const auto& c : r.curves) {
      if (c.domain == d) out += d + "," + std::to_string(c.seed) + "," + std::to_string(c.epochs_to(threshold)) + "\n";
    }
    out += d + ",median," + format_double(r.median_epochs_to(d, threshold)) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------- manifest

inline constexpr const char* kRunManifestName = "run_manifest.cfg";

/// Everything needed to rerun a harness command.
struct RunManifest {
  std::string experiment;  // table2, sweep or table3
  std::string benchmark;
  std::string out;
  std::string cache;  // empty means <out>/cache
  std::size_t seeds = 3;
  std::string grid;   // table2 row names
  std::string sizes;  // sweep sizes
  HarnessSettings settings;

  [[nodiscard]] std::filesystem::path cache_dir() const {
    return cache.empty() ? std::filesystem::path(out) / "cache" : std::filesystem::path(cache);
  }
};

inline std::string format_run_manifest(const RunManifest& m) {
  ConfigMap map = harness_settings_map(m.settings);
  map["experiment"] = m.experiment;
  map["benchmark"] = m.benchmark;
  map["out"] = m.out;
  map["seeds"] = std::to_string(m.seeds);
  if (!m.cache.empty()) map["cache"] = m.cache;
  if (!m.grid.empty()) map["grid"] = m.grid;
  if (!m.sizes.empty()) map["sizes"] = m.sizes;
  return "# tsan-lab run manifest\n" + format_config(map);
}

inline RunManifest read_run_manifest(const std::filesystem::path& path) {
  ConfigReader cfg(read_config_file(path), path.string());
  RunManifest m;
  m.experiment = cfg.get_string("experiment", "");
  if (m.experiment != "table2" && m.experiment != "sweep" && m.experiment != "table3") {
    throw ConfigError(path.string() + ": unknown experiment '" + m.experiment + "'");
  }
  m.benchmark = cfg.get_string("benchmark", "");
  m.out = cfg.get_string("out", "");
  if (m.benchmark.empty() || m.out.empty()) throw ConfigError(path.string() + ": benchmark and out are required");
  m.cache = cfg.get_string("cache", "");
  m.seeds = cfg.get_uint("seeds", m.seeds);
  m.grid = cfg.get_string("grid", "");
  m.sizes = cfg.get_string("sizes", "");
  m.settings = read_harness_settings(cfg);
  cfg.finish();
  return m;
}

inline std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t(detail::trim(item));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

/// Runs the experiment a manifest describes and writes its output files.
inline void run_manifest(const RunManifest& m, bool verbose = true) {
  const std::filesystem::path out(m.out);
  std::filesystem::create_directories(out);
  Pipeline p(m.benchmark, m.settings, m.cache_dir(), verbose);
  const auto seeds = seed_list(m.seeds);
  write_text_atomic(out / kRunManifestName, format_run_manifest(m));
  if (m.experiment == "table2") {
    const auto grid = m.grid.empty() ? default_grid() : select_grid(split_names(m.grid));
    const auto r = table2_harness(p, grid, seeds);
    write_text_atomic(out / "metrics.csv", metrics_csv(p.collect_rows(cell_stages(r.cells))));
    write_text_atomic(out / "table2.csv", table2_csv(r));
    write_text_atomic(out / "table2.txt", table2_text(r));
    write_text_atomic(out / "confusion.csv", confusion_blocks(r.cells));
  } else if (m.experiment == "sweep") {
    const auto r = size_sweep(p, target_domains(p.benchmark()), parse_sizes(m.sizes.empty() ? "5,10,50,all" : m.sizes),
                              seeds, true);
    std::vector<StagePtr> stages;
    std::vector<Cell> blocks;
    for (const auto& c : r.cells) {
      stages.push_back(c.stage);
      blocks.push_back({c.variant + " size=" + c.size, c.target, c.seed, c.stage, c.accuracy, c.confusion, c.run_id});
    }
    write_text_atomic(out / "metrics.csv", metrics_csv(p.collect_rows(stages)));
    write_text_atomic(out / "sweep.csv", sweep_csv(r));
    write_text_atomic(out / "sweep.txt", sweep_text(r));
    write_text_atomic(out / "confusion.csv", confusion_blocks(blocks, "variant"));
  } else {
    const auto r = table3_harness(p, seeds);
    write_text_atomic(out / "metrics.csv", metrics_csv(p.collect_rows(table3_stages(p, r))));
    write_text_atomic(out / "table3.csv", table3_csv(r));
    write_text_atomic(out / "table3.txt", table3_text(r));
    write_text_atomic(out / "seso_curves.csv", seso_curves_csv(r));
    write_text_atomic(out / "seso_convergence.csv", seso_convergence_csv(r));
    write_text_atomic(out / "confusion.csv", confusion_blocks(r.cells, "seso"));
  }
}

}  // namespace tsan_lab
