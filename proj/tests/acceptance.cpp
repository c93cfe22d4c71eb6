// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The tsan-lab Authors
 *
 * @file   acceptance.cpp
 * @brief  Acceptance criteria A1-A8, one PASS/FAIL line each.
 *
 * `--fast` runs A1-A4 and A8, `--benchmark` runs A5-A7, and `--all` runs
 * everything. Benchmark results are cached under the work directory, so a
 * rerun only repeats the checks.
 */
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tsan_lab/experiments/harness.hpp"
#include "tsan_lab/numerics/grad_check.hpp"

namespace fs = std::filesystem;
using namespace tsan_lab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string pts(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.1f", 100.0 * v);
  return buf;
}

Tensor random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

void jitter(const std::vector<Parameter*>& ps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (Parameter* p : ps)
    for (auto& v : p->value.data()) v += u(rng);
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

// ---------------------------------------------------------------- A1

Outcome gradient_correctness() {
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::pair<std::string, double>> errors;
  auto check = [&](const std::string& name, const std::function<Var()>& f, std::vector<Parameter*> ps) {
    errors.emplace_back(name, grad_check(f, ps).max_rel_error);
  };

  {
    Parameter x("x", random_tensor({12, 4}, 1));
    auto conv = init_conv1d("conv", 4, 3, 5, 2);
    std::vector<Parameter*> ps{&x};
    collect(conv, ps);
    jitter(ps, 3);
    const Tensor w = random_tensor({12, 3}, 4);
    check("conv1d_same", [&] { return sum(mul(conv1d_same(param(x), conv), constant(w))); }, ps);
  }
  for (auto dir : {Direction::forward, Direction::backward}) {
    Parameter x("x", random_tensor({10, 3}, 5));
    auto lstm = init_lstm("lstm", 3, 4, 6);
    std::vector<Parameter*> ps{&x};
    collect(lstm, ps);
    jitter(ps, 7);
    const Tensor w = random_tensor({10, 4}, 8);
    check(dir == Direction::forward ? "lstm_forward" : "lstm_forward(backward)",
          [&] { return sum(mul(lstm_forward(param(x), lstm, dir), constant(w))); }, ps);
  }
  {
    Parameter x("x", random_tensor({9, 3}, 9));
    auto bi = init_bilstm("bi", 3, 3, 10);
    std::vector<Parameter*> ps{&x};
    collect(bi, ps);
    jitter(ps, 11);
    const Tensor w = random_tensor({9, 6}, 12);
    check("bilstm_forward", [&] { return sum(mul(bilstm_forward(param(x), bi), constant(w))); }, ps);
  }
  {
    Parameter x("x", random_tensor({6, 5}, 13));
    auto dense = init_dense("dense", 5, 7, 14);
    std::vector<Parameter*> ps{&x};
    collect(dense, ps);
    jitter(ps, 15);
    const Tensor w = random_tensor({6, 7}, 16);
    check("dense_forward", [&] { return sum(mul(dense_forward(param(x), dense), constant(w))); }, ps);
  }
  {
    Parameter logits("logits", random_tensor({15, 7}, 17, 3.0));
    std::vector<int> labels(15);
    for (std::size_t t = 0; t < 15; ++t) labels[t] = static_cast<int>((t * 5) % 7);
    check("log_softmax+nll", [&] { return nll_loss(log_softmax_rows(param(logits)), labels); }, {&logits});
  }
  {
    ModelConfig c;
    c.input_dim = 8;
    c.hidden = 3;
    StepModel m = build_model(c, 18);
    jitter(m.parameters(), 19);
    const Tensor x = random_tensor({20, 8}, 20);
    std::vector<int> labels(20);
    for (std::size_t t = 0; t < 20; ++t) labels[t] = static_cast<int>((t * 3) % 7);
    check("tsan forward", [&] {
      Rng rng(21);
      return nll_loss(step_log_probs(m, x, true, rng), labels);
    }, m.parameters());
  }
  {
    ModelConfig c;
    c.input_dim = 4;
    c.hidden = 2;
    Backbone b = build_backbone(c, 22);
    DenseParams head = build_seso_head(c, 4, 23);
    std::vector<Parameter*> ps = b.parameters();
    collect(head, ps);
    jitter(ps, 24);
    const auto table = build_permutation_table(4, 1);
    const SortingExample ex = make_sorting_example(random_tensor({18, 4}, 25), table, 3);
    const int target = 3;
    check("seso_log_probs", [&] {
      Rng rng(26);
      return nll_loss(seso_log_probs(b, head, ex, true, rng), std::span<const int>(&target, 1));
    }, ps);
  }

  double worst = 0.0;
  std::string detail;
  for (const auto& [name, err] : errors) {
    worst = std::max(worst, err);
    detail += name + " " + fmt(err, 2) + ", ";
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-4 && secs < 120.0, "max rel error " + fmt(worst, 2) + " (" + detail + fmt(secs) + " s)"};
}

// ---------------------------------------------------------------- A2

Outcome shape_suite(const fs::path& work) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::string> failed;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };

  {
    const Tensor lp = log_softmax_rows(constant(random_tensor({50, 7}, 1, 10.0))).value();
    double worst = 0.0;
    for (std::size_t r = 0; r < 50; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 7; ++c) s += std::exp(lp.at(r, c));
      worst = std::max(worst, std::abs(s - 1.0));
    }
    expect(worst <= 1e-12, "softmax rows sum to one");
  }
  for (std::size_t k : {1, 5, 25, 39}) {
    const auto conv = init_conv1d("c", 3, 2, k, k);
    for (std::size_t len = 1; len <= 50; ++len) {
      const Tensor y = conv1d_same(constant(random_tensor({len, 3}, len)), conv).value();
      expect(y.rows() == len && y.cols() == 2, "conv same length K=" + std::to_string(k) + " L=" + std::to_string(len));
    }
  }
  {
    const auto f = init_lstm("f", 3, 4, 1), b = init_lstm("b", 3, 4, 2);
    const BiLstmParams ab{f, b}, ba{b, f};
    const Tensor x = random_tensor({17, 3}, 3);
    Tensor xr({17, 3});
    for (std::size_t t = 0; t < 17; ++t)
      for (std::size_t c = 0; c < 3; ++c) xr.at(t, c) = x.at(16 - t, c);
    const Tensor y = bilstm_forward(constant(x), ab).value();
    const Tensor yr = bilstm_forward(constant(xr), ba).value();
    double worst = 0.0;
    for (std::size_t t = 0; t < 17; ++t)
      for (std::size_t j = 0; j < 4; ++j) {
        worst = std::max(worst, std::abs(y.at(t, j) - yr.at(16 - t, 4 + j)));
        worst = std::max(worst, std::abs(y.at(t, 4 + j) - yr.at(16 - t, j)));
      }
    expect(worst <= 1e-12, "bilstm time reversal");
  }
  {
    const auto table = build_permutation_table(24, 9);
    for (std::size_t len = 9; len <= 80; ++len) {
      const Tensor x = random_tensor({len, 2}, len);
      const auto parts = split_nine(x);
      std::size_t rows = 0, lo = len, hi = 0, r = 0;
      bool same = parts.size() == kSegments;
      for (const auto& p : parts) {
        rows += p.rows();
        lo = std::min(lo, p.rows());
        hi = std::max(hi, p.rows());
        for (std::size_t t = 0; t < p.rows(); ++t, ++r)
          for (std::size_t c = 0; c < 2; ++c) same = same && r < len && p.at(t, c) == x.at(r, c);
      }
      expect(same && rows == len && hi - lo <= 1, "split_nine partition L=" + std::to_string(len));
      for (std::size_t cls = 0; cls < table.perms.size(); cls += 5) {
        const auto back = unshuffle(make_sorting_example(x, table, cls), table);
        bool eq = back.size() == parts.size();
        for (std::size_t s = 0; eq && s < parts.size(); ++s) eq = back[s] == parts[s];
        expect(eq, "permutation inverse L=" + std::to_string(len));
      }
    }
  }
  {
    FeatureSequence s;
    s.id = "v";
    s.features = random_tensor({31, 5}, 4);
    for (auto& v : s.features.data()) v = static_cast<float>(v);
    s.labels = std::vector<int>(31, 2);
    s.relevance = std::vector<bool>(31, true);
    (*s.relevance)[3] = false;
    const auto path = work / "a2.sfm";
    write_sequence(path, s);
    const auto back = read_sequence(path);
    expect(encode_sequence(back) == encode_sequence(s) && back.features == s.features && back.labels == s.labels &&
               back.relevance == s.relevance,
           "sequence file round trip");
  }
  for (auto kind : {ArchKind::conv1d, ArchKind::conv_ensemble, ArchKind::lstm, ArchKind::tsan}) {
    ModelConfig c;
    c.kind = kind;
    c.input_dim = 5;
    c.hidden = 4;
    if (kind == ArchKind::conv1d) c.kernel_sizes = {25};
    const StepModel m = build_model(c, 5);
    const auto path = work / ("a2_" + to_string(kind) + ".tsck");
    save_checkpoint(path, make_checkpoint(m));
    const StepModel back = restore_step_model(load_checkpoint(path), c);
    bool eq = encode_checkpoint(make_checkpoint(back)) == encode_checkpoint(make_checkpoint(m));
    const auto pa = m.parameters(), pb = back.parameters();
    for (std::size_t i = 0; eq && i < pa.size(); ++i) eq = pa[i]->value == pb[i]->value;
    expect(eq, "checkpoint round trip " + to_string(kind));
    Rng rng(0);
    const Tensor lp = step_log_probs(m, random_tensor({13, 5}, 6), false, rng).value();
    double worst = 0.0;
    for (std::size_t t = 0; t < 13; ++t) {
      double s = 0.0;
      for (std::size_t k = 0; k < 7; ++k) s += std::exp(lp.at(t, k));
      worst = std::max(worst, std::abs(s - 1.0));
    }
    expect(lp.rows() == 13 && lp.cols() == 7 && worst <= 1e-12, "step output normalized " + to_string(kind));
  }
  {
    const auto labels = std::vector<int>{0, 1, 2, 3, 4, 5, 6, 6, 2, 1};
    const auto preds = std::vector<int>{0, 1, 2, 0, 4, 5, 1, 6, 2, 3};
    const auto m = confusion(preds, labels);
    expect(m.accuracy() == accuracy(preds, labels), "confusion trace equals accuracy");
  }

  const double secs = seconds_since(start);
  std::string detail = failed.empty() ? "all properties hold" : failed.size() == 1 ? failed.front() : failed.front() + " and " + std::to_string(failed.size() - 1) + " more";
  return {failed.empty() && secs < 60.0, detail + " (" + fmt(secs) + " s)"};
}

// ---------------------------------------------------------------- A3

Outcome overfit_sanity() {
  const auto start = std::chrono::steady_clock::now();
  BenchmarkSpec spec = default_benchmark_spec();
  spec.feature_dim = 16;
  spec.length = {300, 300};
  const SharedEmission shared = make_shared_emission(spec);
  const DomainEmission emission = make_domain_emission(spec, shared, 0, spec.source.shift);
  const Dataset one{generate_video(spec, shared, emission, 0, 0)};

  ModelConfig mc;
  mc.input_dim = 16;
  mc.hidden = 32;
  mc.dropout_rate = 0.0;
  TrainConfig tc;
  tc.epochs = 1;
  tc.lr = 0.1;
  tc.dropout_rate = 0.0;
  tc.relevance_drop_prob = 0.0;
  tc.select_best_on_val = false;
  StepModel model = build_model(mc, 1);
  double acc = 0.0;
  std::size_t epoch = 0;
  while (epoch < 200 && acc < 0.99) {
    ++epoch;
    tc.seed = epoch;
    model = train_model(std::move(model), one, {}, tc).first;
    acc = evaluate(model, one).pooled_accuracy;
  }
  const double secs = seconds_since(start);
  return {acc >= 0.99 && secs < 600.0, "training accuracy " + percent(acc) + "% after " + std::to_string(epoch) +
                                           " epoch(s) on one " + std::to_string(one.front().length()) +
                                           "-second video, lr 0.1 (" + fmt(secs) + " s)"};
}

// ---------------------------------------------------------------- shared benchmark

fs::path ensure_benchmark(const fs::path& work) {
  const fs::path dir = work / "bench";
  const std::string want = format_benchmark_spec(default_benchmark_spec());
  if (fs::exists(dir / kManifestName) && fs::exists(dir / kBenchmarkSpecName) &&
      read_text_file(dir / kBenchmarkSpecName) == want) {
    return dir;
  }
  fs::remove_all(dir);
  generate_benchmark(default_benchmark_spec(), dir);
  return dir;
}

HarnessSettings read_settings(const fs::path& path) {
  ConfigReader cfg(read_config_file(path), path.string());
  auto s = read_harness_settings(cfg);
  cfg.finish();
  return s;
}

// ---------------------------------------------------------------- A4

Outcome seso_learnability(const fs::path& work, HarnessSettings settings) {
  const auto start = std::chrono::steady_clock::now();
  settings.seso.permutations = 24;
  settings.seso.epochs = 50;
  Pipeline p(ensure_benchmark(work), settings, work / "cache");
  const auto stage = seso_stage("tsan", p.model(ArchKind::tsan), "source", 0);
  const bool cached = fs::exists(p.cache_dir() / (p.run_id(*stage) + ".key"));
  const auto r = p.run(stage);
  const auto curve = r->curve("val", "sorting_accuracy");
  double best = 0.0;
  std::size_t first = 0;
  for (std::size_t e = 0; e < curve.size(); ++e) {
    best = std::max(best, curve[e]);
    if (!first && curve[e] > 5.0 / 24.0) first = e + 1;
  }
  const double secs = seconds_since(start);
  return {first != 0 && secs < 1800.0,
          "best validation sorting accuracy " + percent(best) + "% vs chance threshold " + percent(5.0 / 24.0) +
              "%, first exceeded at epoch " + (first ? std::to_string(first) : std::string("never")) + " (" +
              fmt(secs) + " s" + (cached ? ", cached stage" : "") + ")"};
}

// ---------------------------------------------------------------- A5-A7

Outcome transfer_benefit(Pipeline& p, const std::vector<std::uint64_t>& seeds) {
  const auto r = table2_harness(p, select_grid({"tsan+seso", "tsan", "lstm1"}), seeds);
  const double ours = r.median_avg("tsan+seso");
  const double tsan = r.median_avg("tsan");
  const double lstm = r.median_avg("lstm1");
  write_text_atomic(p.cache_dir().parent_path() / "a5_table2.txt", table2_text(r));
  return {ours - tsan >= 0.01 && ours - lstm >= 0.01,
          "median AVG TSAN+SeSo " + percent(ours) + "% vs TSAN " + percent(tsan) + "% (" + pts(ours - tsan) +
              ") vs LSTM1 " + percent(lstm) + "% (" + pts(ours - lstm) + "), need >= +1.0 each"};
}

Outcome size_sweep_shape(Pipeline& p, const std::vector<std::uint64_t>& seeds) {
  const auto r = size_sweep(p, target_domains(p.benchmark()), parse_sizes("5,10,50,all"), seeds, true, {"tsan+seso"});
  write_text_atomic(p.cache_dir().parent_path() / "a6_sweep.txt", sweep_text(r));
  bool ok = true;
  std::string detail;
  for (const auto& t : r.targets) {
    std::vector<double> acc;
    for (const auto& s : r.sizes) acc.push_back(r.median_accuracy(t, "tsan+seso", s));
    const bool gain = acc.back() - acc.front() >= 0.05;
    bool monotone = true;
    for (std::size_t i = 1; i < acc.size(); ++i) monotone = monotone && acc[i] >= acc[i - 1] - 0.02;
    ok = ok && gain && monotone;
    detail += t + " [";
    for (std::size_t i = 0; i < acc.size(); ++i) detail += (i ? " " : "") + percent(acc[i]);
    detail += "] all-5 " + pts(acc.back() - acc.front()) + (monotone ? "" : " non-monotone") + "; ";
  }
  return {ok, detail + "need all-5 >= +5.0, steps >= -2.0"};
}

Outcome seso_source_vs_target(Pipeline& p, const std::vector<std::uint64_t>& seeds) {
  const auto r = table3_harness(p, seeds);
  write_text_atomic(p.cache_dir().parent_path() / "a7_table3.txt", table3_text(r));
  const double src = r.median_epochs_to(r.seso_domains.front(), 0.5);
  const double small = r.median_epochs_to(r.smallest_target, 0.5);
  bool ok = src < small;
  std::string detail = "epochs to 50% sorting accuracy: source " + fmt(src) + ", " + r.smallest_target + " " +
                       fmt(small) + "; step accuracy source-minus-target pretraining:";
  for (const auto& t : r.targets) {
    const double gap = r.median_accuracy(t, r.seso_domains.front()) - r.median_accuracy(t, t);
    ok = ok && std::abs(gap) <= 0.02;
    detail += " " + t + " " + pts(gap);
  }
  return {ok, detail + " (need within +-2.0)"};
}

// ---------------------------------------------------------------- A8

int sh(const std::string& cmd) { return std::system(cmd.c_str()); }

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

/// Relative path -> bytes of every CSV below `dir`, excluding caches.
std::map<std::string, std::string> csv_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    const auto rel = fs::relative(e.path(), dir).string();
    if (e.is_regular_file() && e.path().extension() == ".csv" && rel.find("cache/") == std::string::npos) {
      out[rel] = read_text_file(e.path());
    }
  }
  return out;
}

Outcome cli_determinism(const fs::path& cli, const fs::path& work) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path root = work / "a8";
  fs::remove_all(root);
  fs::create_directories(root);
  write_text_atomic(root / "spec.cfg", "source_videos = 12\ntarget_videos = 8,8,10\nmin_length = 60\nmax_length = 90\n"
                                       "feature_dim = 8\nembedding_dim = 4\n");
  write_text_atomic(root / "seso.cfg", "hidden = 4\nseso_permutations = 6\nseso_epochs = 3\n");
  write_text_atomic(root / "run.cfg", "hidden = 4\nepochs = 3\n");
  write_text_atomic(root / "harness.cfg", "hidden = 3\nepochs = 2\nseso_permutations = 4\nseso_epochs = 2\n");
  const std::string bin = quote(cli);
  const std::string quiet = " > /dev/null 2>&1";

  std::vector<std::string> failed;
  for (int pass = 0; pass < 2; ++pass) {
    const fs::path out = root / ("run" + std::to_string(pass));
    fs::create_directories(out);
    const std::string threads = pass == 0 ? "TSAN_LAB_THREADS=1 " : "TSAN_LAB_THREADS=3 ";
    const fs::path bench = out / "bench";
    const std::vector<std::string> cmds{
        bin + " gen-data --spec " + quote(root / "spec.cfg") + " --out " + quote(bench),
        bin + " pretrain-seso --data " + quote(bench) + " --config " + quote(root / "seso.cfg") + " --out " +
            quote(out / "seso.tsck"),
        bin + " train --data " + quote(bench) + " --domain target_a --arch tsan --init " + quote(out / "seso.tsck") +
            " --config " + quote(root / "run.cfg") + " --out " + quote(out / "step.tsck"),
        bin + " train --data " + quote(bench) + " --arch lstm --init random --config " + quote(root / "run.cfg") +
            " --out " + quote(out / "lstm.tsck"),
        bin + " eval --ckpt " + quote(out / "step.tsck") + " --data " + quote(bench) + " --domain target_a --report " +
            quote(out / "eval.csv") + " --confusion " + quote(out / "eval_confusion.csv"),
        threads + bin + " table2 --benchmark " + quote(bench) + " --seeds 2 --rows lstm1-baseline,conv1d-k5,tsan+seso --config " +
            quote(root / "harness.cfg") + " --out " + quote(out / "table2"),
        threads + bin + " sweep --benchmark " + quote(bench) + " --seeds 1 --sizes 2,3,all --config " +
            quote(root / "harness.cfg") + " --out " + quote(out / "sweep"),
        threads + bin + " table3 --benchmark " + quote(bench) + " --seeds 2 --config " + quote(root / "harness.cfg") +
            " --out " + quote(out / "table3"),
    };
    for (const auto& c : cmds) {
      if (sh(c + quiet) != 0) failed.push_back("command failed: " + c);
    }
  }
  // Rerun from the manifest over the first output, caches removed.
  const auto first = csv_files(root / "run0");
  fs::remove_all(root / "run0" / "table3" / "cache");
  if (sh(bin + " rerun --manifest " + quote(root / "run0" / "table3" / kRunManifestName) + quiet) != 0) {
    failed.push_back("rerun failed");
  }
  const auto again = csv_files(root / "run0");
  const auto second = csv_files(root / "run1");
  std::size_t compared = 0;
  for (const auto& [rel, bytes] : first) {
    ++compared;
    auto it = second.find(rel);
    if (it == second.end() || it->second != bytes) failed.push_back(rel + " differs between runs");
    auto jt = again.find(rel);
    if (jt == again.end() || jt->second != bytes) failed.push_back(rel + " differs after manifest rerun");
  }
  if (compared < 10) failed.push_back("only " + std::to_string(compared) + " CSV files produced");
  const double secs = seconds_since(start);
  return {failed.empty(), (failed.empty() ? std::to_string(compared) + " CSV files byte-identical across reruns"
                                          : failed.front() + (failed.size() > 1 ? " (+" + std::to_string(failed.size() - 1) + " more)" : "")) +
                              " (" + fmt(secs) + " s)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  bool fast = false, bench = false, all = false;
  std::string cli = TSAN_LAB_CLI_PATH, work = TSAN_LAB_ACCEPTANCE_WORK, config = TSAN_LAB_DESK_CONFIG;
  std::size_t seeds = 3;
  app.add_flag("--fast", fast, "A1-A4 and A8");
  app.add_flag("--benchmark", bench, "A5-A7");
  app.add_flag("--all", all, "A1-A8");
  app.add_option("--cli", cli, "tsan_lab executable")->capture_default_str();
  app.add_option("--work", work, "Work directory (benchmark and stage cache)")->capture_default_str();
  app.add_option("--config", config, "Harness settings for A4-A7")->capture_default_str();
  app.add_option("--seeds", seeds, "Seeds for A5-A7")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  if (!fast && !bench) all = true;
  if (all) fast = bench = true;

  fs::create_directories(work);
  int failures = 0;
  auto run = [&](const char* id, const char* name, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << id << " " << (o.pass ? "PASS" : "FAIL") << " " << name << ": " << o.detail << std::endl;
  };

  const HarnessSettings settings = read_settings(config);
  if (fast) {
    run("A1", "gradient correctness", gradient_correctness);
    run("A2", "shape and normalization suite", [&] { return shape_suite(work); });
    run("A3", "overfit sanity", overfit_sanity);
    run("A4", "sequence-sorting learnability", [&] { return seso_learnability(work, settings); });
    run("A8", "determinism", [&] { return cli_determinism(cli, work); });
  }
  if (bench) {
    Pipeline p(ensure_benchmark(work), settings, fs::path(work) / "cache");
    const auto s = seed_list(seeds);
    run("A5", "transfer and sorting benefit", [&] { return transfer_benefit(p, s); });
    run("A6", "size-sweep shape", [&] { return size_sweep_shape(p, s); });
    run("A7", "sorting source vs target", [&] { return seso_source_vs_target(p, s); });
  }
  return failures == 0 ? 0 : 1;
}
