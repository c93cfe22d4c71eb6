// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The tsan-lab Authors
 *
 * @file   tsan_lab.cpp
 * @brief  Command-line front end: data generation, single runs and the
 *         experiment harnesses.
 *
 * Exit codes: 0 success, 2 configuration error, 3 data-format error.
 */
#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>

#include "tsan_lab/experiments/harness.hpp"

namespace fs = std::filesystem;
using namespace tsan_lab;

namespace {

constexpr int kConfigExit = 2;
constexpr int kDataExit = 3;

ConfigReader config_reader(const std::string& path) {
  if (path.empty()) return ConfigReader(ConfigMap{}, "defaults");
  return ConfigReader(read_config_file(path), path);
}

/// A benchmark directory (split by --domain/--split) or a plain folder of
/// .sfm files.
Dataset load_data(const fs::path& dir, const std::string& domain, Split split) {
  if (!fs::is_directory(dir)) throw FormatError(dir.string() + ": no such data directory");
  if (fs::exists(dir / kManifestName)) {
    Benchmark b(dir);
    const auto domains = b.domains();
    if (std::find(domains.begin(), domains.end(), domain) == domains.end()) {
      throw ConfigError(dir.string() + ": no domain '" + domain + "'");
    }
    return b.load(domain, split);
  }
  if (split != Split::train && split != Split::test) return {};
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".sfm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Dataset out;
  for (const auto& f : files) {
    auto seq = read_sequence(f);
    seq.id = f.stem().string();
    out.push_back(std::move(seq));
  }
  if (out.empty()) throw FormatError(dir.string() + ": no .sfm files");
  return out;
}

std::string data_fingerprint(const Dataset& d) {
  std::string text;
  for (const auto& s : d) text += s.id + ":" + std::to_string(s.length()) + "x" + std::to_string(s.width()) + ";";
  return text;
}

fs::path metrics_path_for(const std::string& out) { return fs::path(out + ".metrics.csv"); }

void history_rows(std::vector<MetricRow>& rows, const MetricRow& base, const History& h, const char* loss_name,
                  const char* val_name) {
  for (const auto& e : h.epochs) {
    MetricRow r = base;
    r.epoch = e.epoch;
    r.split = "train";
    r.metric = loss_name;
    r.value = e.train_loss;
    rows.push_back(r);
    if (!std::isnan(e.val_accuracy)) {
      r.split = "val";
      r.metric = val_name;
      r.value = e.val_accuracy;
      rows.push_back(r);
    }
  }
}

int gen_data(const std::string& spec_path, const std::string& out) {
  ConfigReader cfg = config_reader(spec_path);
  const BenchmarkSpec spec = read_benchmark_spec(cfg);
  cfg.finish();
  const auto entries = generate_benchmark(spec, out);
  std::cerr << "wrote " << entries.size() << " videos to " << out << "\n";
  return 0;
}

int pretrain(const std::string& data, const std::string& domain, const std::string& config, const std::string& out) {
  ConfigReader cfg = config_reader(config);
  const Dataset train = load_data(data, domain, Split::train);
  const Dataset val = load_data(data, domain, Split::val);
  ModelConfig base;
  base.input_dim = train.front().width();
  const ModelConfig mc = read_model_config(cfg, base);
  const TrainConfig tc = read_train_config(cfg);
  const SesoConfig sc = read_seso_config(cfg);
  cfg.finish();
  const SesoResult r = pretrain_seso(train, val, mc, tc, sc, [](const EpochRecord& e) {
    std::cerr << "epoch " << e.epoch << " loss " << format_double(e.train_loss) << " sorting accuracy "
              << format_double(e.val_accuracy) << "\n";
  });
  const Checkpoint ck = r.checkpoint();
  save_checkpoint(out, ck);

  ConfigMap all = model_config_map(mc);
  for (auto& [k, v] : train_config_map(tc)) all[k] = v;
  for (auto& [k, v] : seso_config_map(sc)) all[k] = v;
  const MetricRow base_row{hex64(fnv1a("seso\n" + format_config(all) + data_fingerprint(train))), domain,
                           to_string(mc.kind), "random", tc.seed, 0, "", "", 0.0};
  std::vector<MetricRow> rows;
  history_rows(rows, base_row, r.history, "sorting_loss", "sorting_accuracy");
  write_text_atomic(metrics_path_for(out), metrics_csv(rows));
  return 0;
}

int train(const std::string& data, const std::string& domain, const std::string& arch, const std::string& init,
          const std::string& config, const std::string& out) {
  ConfigReader cfg = config_reader(config);
  const ArchKind kind = parse_arch(arch);
  if (cfg.has("arch") && parse_arch(cfg.get_string("arch", "")) != kind) {
    throw ConfigError("config arch differs from --arch " + arch);
  }
  const Dataset train_set = load_data(data, domain, Split::train);
  const Dataset val = load_data(data, domain, Split::val);
  ModelConfig base;
  base.kind = kind;
  base.input_dim = train_set.front().width();
  const ModelConfig mc = read_model_config(cfg, base);
  const TrainConfig tc = read_train_config(cfg);
  cfg.finish();

  auto progress = [](const EpochRecord& e) {
    std::cerr << "epoch " << e.epoch << " loss " << format_double(e.train_loss) << " val accuracy "
              << format_double(e.val_accuracy) << "\n";
  };
  std::pair<StepModel, History> trained;
  std::string init_text = "random";
  if (init == "random") {
    trained = train_step_model(train_set, val, mc, tc, TrainInit::random(tc.seed), progress);
  } else {
    const Checkpoint ck = load_checkpoint(init);
    init_text = "ckpt";
    if (ck.permutations) {
      init_text = "seso";
      trained = finetune_from_seso(ck, train_set, val, mc, tc, progress);
    } else {
      trained = train_model(restore_step_model(ck, mc), train_set, val, tc, progress);
    }
  }
  save_checkpoint(out, make_checkpoint(trained.first));

  ConfigMap all = model_config_map(mc);
  for (auto& [k, v] : train_config_map(tc)) all[k] = v;
  std::string init_key = init_text;
  if (init != "random") {
    const auto bytes = io::read_file(init);
    init_key += ":" + hex64(fnv1a(std::string_view(bytes.data(), bytes.size())));
  }
  const MetricRow base_row{hex64(fnv1a("step\n" + format_config(all) + init_key + data_fingerprint(train_set))),
                           domain, to_string(mc.kind), init_text, tc.seed, 0, "", "", 0.0};
  std::vector<MetricRow> rows;
  history_rows(rows, base_row, trained.second, "loss", "accuracy");
  MetricRow sel = base_row;
  sel.epoch = trained.second.selected_epoch;
  sel.split = "val";
  sel.metric = "selected_epoch";
  sel.value = static_cast<double>(trained.second.selected_epoch);
  rows.push_back(sel);
  write_text_atomic(metrics_path_for(out), metrics_csv(rows));
  return 0;
}

int eval(const std::string& ckpt, const std::string& data, const std::string& domain, const std::string& split,
         const std::string& report, const std::string& confusion_out) {
  const Checkpoint ck = load_checkpoint(ckpt);
  if (ck.permutations) throw ConfigError(ckpt + ": a sequence-sorting checkpoint has no step head; finetune it first");
  const StepModel m = restore_step_model(ck);
  const Dataset d = load_data(data, domain, parse_split(split));
  if (d.empty()) throw FormatError(data + ": no videos in split " + split);
  const MetricsReport r = evaluate(m, d);
  const auto bytes = io::read_file(ckpt);
  const std::string id = hex64(fnv1a(std::string_view(bytes.data(), bytes.size()), fnv1a(data_fingerprint(d))));
  std::vector<MetricRow> rows;
  for (std::size_t v = 0; v < r.video_ids.size(); ++v) {
    rows.push_back({id, domain, to_string(m.config().kind), "ckpt", 0, 0, split, "accuracy:" + r.video_ids[v],
                    r.video_accuracy[v]});
  }
  rows.push_back({id, domain, to_string(m.config().kind), "ckpt", 0, 0, split, "accuracy", r.pooled_accuracy});
  write_text_atomic(report, metrics_csv(rows));
  if (!confusion_out.empty()) write_text_atomic(confusion_out, confusion_csv(r.confusion));
  std::cout << "pooled accuracy " << percent(r.pooled_accuracy) << "% over " << r.confusion.total() << " seconds\n";
  return 0;
}

RunManifest harness_manifest(const std::string& experiment, const std::string& bench, const std::string& out,
                             const std::string& cache, std::size_t seeds, const std::string& config) {
  ConfigReader cfg = config_reader(config);
  RunManifest m;
  m.experiment = experiment;
  m.benchmark = bench;
  m.out = out;
  m.cache = cache;
  m.seeds = seeds;
  m.settings = read_harness_settings(cfg);
  cfg.finish();
  if (!fs::exists(fs::path(bench) / kManifestName)) throw FormatError(bench + ": missing " + kManifestName);
  return m;
}

void print_table(const RunManifest& m) {
  const fs::path out(m.out);
  const char* name = m.experiment == "table2" ? "table2.txt" : m.experiment == "sweep" ? "sweep.txt" : "table3.txt";
  std::cout << read_text_file(out / name);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Workflow-step recognition models, sequence-sorting pretraining and experiment harnesses"};
  app.require_subcommand(1);

  std::string spec, out, data, config, arch, init = "random", ckpt, report, bench, cache, domain = "source",
                                         split = "test", sizes = "5,10,50,all", rows, manifest, confusion_out;
  std::size_t seeds = 3;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic benchmark");
  gen->add_option("--spec", spec, "Benchmark spec file (key = value)")->required();
  gen->add_option("--out", out, "Output directory")->required();

  auto* pre = app.add_subcommand("pretrain-seso", "Sequence-sorting pretraining");
  pre->add_option("--data", data, "Benchmark or .sfm directory")->required();
  pre->add_option("--config", config, "Run config");
  pre->add_option("--out", out, "Checkpoint path")->required();
  pre->add_option("--domain", domain, "Benchmark domain")->capture_default_str();

  auto* tr = app.add_subcommand("train", "Supervised step training");
  tr->add_option("--data", data, "Benchmark or .sfm directory")->required();
  tr->add_option("--arch", arch, "conv1d, conv_ensemble, lstm or tsan")->required();
  tr->add_option("--init", init, "random, or a checkpoint path")->capture_default_str();
  tr->add_option("--config", config, "Run config");
  tr->add_option("--out", out, "Checkpoint path")->required();
  tr->add_option("--domain", domain, "Benchmark domain")->capture_default_str();

  auto* ev = app.add_subcommand("eval", "Evaluate a step model");
  ev->add_option("--ckpt", ckpt, "Checkpoint path")->required();
  ev->add_option("--data", data, "Benchmark or .sfm directory")->required();
  ev->add_option("--report", report, "Metrics CSV path")->required();
  ev->add_option("--domain", domain, "Benchmark domain")->capture_default_str();
  ev->add_option("--split", split, "train, val or test")->capture_default_str();
  ev->add_option("--confusion", confusion_out, "Confusion matrix CSV path");

  auto harness_options = [&](CLI::App* c) {
    c->add_option("--benchmark", bench, "Benchmark directory")->required();
    c->add_option("--out", out, "Output directory")->required();
    c->add_option("--seeds", seeds, "Number of seeds")->capture_default_str();
    c->add_option("--config", config, "Harness settings");
    c->add_option("--cache", cache, "Stage cache directory (default <out>/cache)");
  };
  auto* t2 = app.add_subcommand("table2", "Architecture grid");
  harness_options(t2);
  t2->add_option("--rows", rows, "Comma-separated grid rows (default: all)");
  auto* sw = app.add_subcommand("sweep", "Training-set-size sweep");
  harness_options(sw);
  sw->add_option("--sizes", sizes, "Ascending sizes, 'all' last")->capture_default_str();
  auto* t3 = app.add_subcommand("table3", "Sorting pretraining on source versus target");
  harness_options(t3);

  auto* re = app.add_subcommand("rerun", "Rerun a harness from its run manifest");
  re->add_option("--manifest", manifest, "run_manifest.cfg")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    if (gen->parsed()) return gen_data(spec, out);
    if (pre->parsed()) return pretrain(data, domain, config, out);
    if (tr->parsed()) return train(data, domain, arch, init, config, out);
    if (ev->parsed()) return eval(ckpt, data, domain, split, report, confusion_out);
    RunManifest m;
    if (re->parsed()) {
      m = read_run_manifest(manifest);
    } else if (t2->parsed()) {
      m = harness_manifest("table2", bench, out, cache, seeds, config);
      if (!rows.empty()) {
        select_grid(split_names(rows));
        m.grid = rows;
      }
    } else if (sw->parsed()) {
      m = harness_manifest("sweep", bench, out, cache, seeds, config);
      parse_sizes(sizes);
      m.sizes = sizes;
    } else {
      m = harness_manifest("table3", bench, out, cache, seeds, config);
    }
    if (m.seeds == 0) throw ConfigError("--seeds must be positive");
    run_manifest(m);
    print_table(m);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataExit;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
