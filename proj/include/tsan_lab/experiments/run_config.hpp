// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The tsan-lab Authors
 *
 * @file   run_config.hpp
 * @brief  Mapping of model, training and pretraining settings onto the
 *         key = value run-config format.
 *
 * Recognized keys:
 *
 *   model:     arch, input_dim, hidden, kernel_sizes, lstm_layers, num_classes
 *   training:  epochs, lr, dropout_rate, relevance_drop_prob, seed,
 *              select_best_on_val, clip_norm
 *   seso:      seso_permutations, seso_table_seed, seso_epochs, seso_lr,
 *              seso_val_puzzles
 */
#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>

#include "tsan_lab/config.hpp"
#include "tsan_lab/models/model.hpp"
#include "tsan_lab/training/training.hpp"

namespace tsan_lab {

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (auto x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
  return s;
}

inline ConfigMap model_config_map(const ModelConfig& c) {
  return {{"arch", to_string(c.kind)},
          {"input_dim", std::to_string(c.input_dim)},
          {"hidden", std::to_string(c.hidden)},
          {"kernel_sizes", join_sizes(c.kernel_sizes)},
          {"lstm_layers", std::to_string(c.lstm_layers)},
          {"num_classes", std::to_string(c.num_classes)},
          {"dropout_rate", format_double(c.dropout_rate)}};
}

/// Reads model keys over `base`. A single-kernel default is substituted for
/// conv1d when kernel_sizes is not given.
inline ModelConfig read_model_config(ConfigReader& cfg, ModelConfig base = {}) {
  ModelConfig c = base;
  c.kind = parse_arch(cfg.get_string("arch", to_string(c.kind)));
  c.input_dim = cfg.get_uint("input_dim", c.input_dim);
  c.hidden = cfg.get_uint("hidden", c.hidden);
  if (cfg.has("kernel_sizes")) {
    const auto ks = cfg.get_uint_list("kernel_sizes", {});
    c.kernel_sizes.assign(ks.begin(), ks.end());
  } else {
    cfg.get_string("kernel_sizes", "");
    if (c.kind == ArchKind::conv1d && c.kernel_sizes.size() != 1) c.kernel_sizes = {39};
  }
  c.lstm_layers = cfg.get_uint("lstm_layers", c.lstm_layers);
  c.num_classes = cfg.get_uint("num_classes", c.num_classes);
  c.dropout_rate = cfg.get_double("dropout_rate", c.dropout_rate);
  c.validate();
  return c;
}

inline TrainConfig read_train_config(ConfigReader& cfg, TrainConfig base = {}) {
  TrainConfig t = base;
  t.epochs = cfg.get_uint("epochs", t.epochs);
  if (cfg.has("lr")) t.lr = cfg.get_double("lr", 0.0);
  else cfg.get_string("lr", "");
  t.dropout_rate = cfg.get_double("dropout_rate", t.dropout_rate);
  t.relevance_drop_prob = cfg.get_double("relevance_drop_prob", t.relevance_drop_prob);
  t.seed = cfg.get_uint("seed", t.seed);
  t.select_best_on_val = cfg.get_bool("select_best_on_val", t.select_best_on_val);
  t.clip_norm = cfg.get_double("clip_norm", t.clip_norm);
  t.validate();
  return t;
}

inline ConfigMap train_config_map(const TrainConfig& t) {
  ConfigMap m{{"epochs", std::to_string(t.epochs)},
              {"dropout_rate", format_double(t.dropout_rate)},
              {"relevance_drop_prob", format_double(t.relevance_drop_prob)},
              {"seed", std::to_string(t.seed)},
              {"select_best_on_val", t.select_best_on_val ? "true" : "false"},
              {"clip_norm", format_double(t.clip_norm)}};
  if (t.lr) m["lr"] = format_double(*t.lr);
  return m;
}

/// Sequence-sorting pretraining settings.
struct SesoConfig {
  std::size_t permutations = 64;
  std::uint64_t table_seed = 9;
  std::size_t epochs = 50;
  std::optional<double> lr;
  std::size_t val_puzzles = 4;

  void validate() const {
    if (permutations == 0) throw ConfigError("seso_permutations must be positive");
    if (val_puzzles == 0) throw ConfigError("seso_val_puzzles must be positive");
  }
};

inline SesoConfig read_seso_config(ConfigReader& cfg, SesoConfig base = {}) {
  SesoConfig s = base;
  s.permutations = cfg.get_uint("seso_permutations", s.permutations);
  s.table_seed = cfg.get_uint("seso_table_seed", s.table_seed);
  s.epochs = cfg.get_uint("seso_epochs", s.epochs);
  if (cfg.has("seso_lr")) s.lr = cfg.get_double("seso_lr", 0.0);
  else cfg.get_string("seso_lr", "");
  s.val_puzzles = cfg.get_uint("seso_val_puzzles", s.val_puzzles);
  s.validate();
  return s;
}

inline ConfigMap seso_config_map(const SesoConfig& s) {
  ConfigMap m{{"seso_permutations", std::to_string(s.permutations)},
              {"seso_table_seed", std::to_string(s.table_seed)},
              {"seso_epochs", std::to_string(s.epochs)},
              {"seso_val_puzzles", std::to_string(s.val_puzzles)}};
  if (s.lr) m["seso_lr"] = format_double(*s.lr);
  return m;
}

}  // namespace tsan_lab
