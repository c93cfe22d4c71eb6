// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The tsan-lab Authors
 *
 * @file   checkpoint.hpp
 * @brief  Binary model checkpoints.
 *
 * Layout (little-endian):
 *
 *   "TSCK"                       magic
 *   u32 version                  = 1
 *   u32 n, n bytes               UTF-8 config text (key = value lines)
 *   u32 tensor count
 *   per tensor:
 *     u16 name length, name bytes
 *     u8 rank, rank x u64 dims
 *     prod(dims) x f64 values    row-major
 *
 * The config text holds the model configuration and, for sequence-sorting
 * checkpoints, the permutation table as seso_permutations / seso_table_seed.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tsan_lab/binary_io.hpp"
#include "tsan_lab/experiments/run_config.hpp"
#include "tsan_lab/models/model.hpp"

namespace tsan_lab {

inline constexpr std::string_view kCheckpointMagic = "TSCK";
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::string_view kSesoHeadPrefix = "seso_head.";

struct PermutationSpec {
  std::size_t count = 0;
  std::uint64_t seed = 0;
  friend bool operator==(const PermutationSpec&, const PermutationSpec&) = default;
};

struct NamedTensor {
  std::string name;
  Tensor value;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct Checkpoint {
  ModelConfig config;
  std::optional<PermutationSpec> permutations;
  std::vector<NamedTensor> tensors;

  [[nodiscard]] const NamedTensor* find(const std::string& name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return &t;
    }
    return nullptr;
  }

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline void append_params(Checkpoint& ck, const std::vector<const Parameter*>& params) {
  for (const Parameter* p : params) ck.tensors.push_back({p->name, p->value});
}

inline Checkpoint make_checkpoint(const StepModel& m) {
  Checkpoint ck{m.config(), std::nullopt, {}};
  append_params(ck, m.parameters());
  return ck;
}

inline Checkpoint make_checkpoint(const Backbone& b) {
  Checkpoint ck{b.config, std::nullopt, {}};
  append_params(ck, b.parameters());
  return ck;
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

inline std::string checkpoint_config_text(const Checkpoint& ck) {
  ConfigMap m = model_config_map(ck.config);
  if (ck.permutations) {
    m["seso_permutations"] = std::to_string(ck.permutations->count);
    m["seso_table_seed"] = std::to_string(ck.permutations->seed);
  }
  return format_config(m);
}

inline std::vector<char> encode_checkpoint(const Checkpoint& ck) {
  io::ByteWriter w;
  w.put_bytes(kCheckpointMagic);
  w.put(kCheckpointVersion);
  const std::string text = checkpoint_config_text(ck);
  w.put(static_cast<std::uint32_t>(text.size()));
  w.put_bytes(text);
  w.put(static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& t : ck.tensors) {
    if (t.name.size() > 0xFFFF) throw FormatError("parameter name too long: " + t.name);
    w.put(static_cast<std::uint16_t>(t.name.size()));
    w.put_bytes(t.name);
    w.put(static_cast<std::uint8_t>(t.value.rank()));
    for (auto d : t.value.shape()) w.put(static_cast<std::uint64_t>(d));
    for (double v : t.value.data()) w.put_f64(v);
  }
  return w.bytes();
}

inline Checkpoint decode_checkpoint(std::vector<char> bytes, const std::string& origin) {
  io::ByteReader r(std::move(bytes), origin);
  if (r.take(kCheckpointMagic.size(), "magic") != kCheckpointMagic) {
    throw BadMagicError(origin + ": not a TSCK checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw VersionMismatchError(origin + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto text_len = r.get<std::uint32_t>("config length");
  const std::string text(r.take(text_len, "config text"));

  Checkpoint ck;
  try {
    ConfigReader cfg(parse_config_text(text, origin + " config"), origin + " config");
    ck.config = read_model_config(cfg);
    if (cfg.has("seso_permutations")) {
      ck.permutations = PermutationSpec{cfg.get_uint("seso_permutations", 0), cfg.get_uint("seso_table_seed", 0)};
    }
    cfg.finish();
  } catch (const ConfigError& e) {
    throw FormatError(origin + ": malformed checkpoint config: " + e.what());
  }

  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto name_len = r.get<std::uint16_t>("name length");
    t.name = std::string(r.take(name_len, "name"));
    const auto rank = r.get<std::uint8_t>("rank");
    if (rank == 0) throw FormatError(origin + ": tensor " + t.name + " has rank 0");
    Shape shape;
    std::uint64_t numel = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      const auto d = r.get<std::uint64_t>("dims");
      if (d == 0 || d > r.remaining()) {
        throw ShapeMismatchError(origin + ": tensor " + t.name + " declares impossible dimension " + std::to_string(d));
      }
      shape.push_back(d);
      numel *= d;
    }
    if (numel * 8 > r.remaining()) {
      throw TruncatedError(origin + ": tensor " + t.name + " declares " + std::to_string(numel) + " values, only " +
                           std::to_string(r.remaining() / 8) + " remain");
    }
    std::vector<double> data(numel);
    for (auto& v : data) v = r.get_f64("tensor data");
    t.value = Tensor(std::move(shape), std::move(data));
    ck.tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0) throw FormatError(origin + ": " + std::to_string(r.remaining()) + " trailing bytes");
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  io::write_file_atomic(path, encode_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Restoring models
// ---------------------------------------------------------------------------

namespace detail {

/// Copies checkpoint tensors into `params`; every tensor must be claimed
/// unless its name starts with one of `ignored_prefixes`.
inline void restore_params(const Checkpoint& ck, const std::vector<Parameter*>& params,
                           const std::vector<std::string_view>& ignored_prefixes) {
  std::map<std::string, Parameter*> by_name;
  for (Parameter* p : params) by_name[p->name] = p;
  std::size_t restored = 0;
  for (const auto& t : ck.tensors) {
    auto it = by_name.find(t.name);
    if (it == by_name.end()) {
      bool ignored = false;
      for (auto prefix : ignored_prefixes) ignored = ignored || t.name.starts_with(prefix);
      if (ignored) continue;
      throw UnknownParameterError("checkpoint parameter '" + t.name + "' does not exist in a " +
                                  to_string(ck.config.kind) + " model");
    }
    if (it->second->value.shape() != t.value.shape()) {
      throw ShapeMismatchError("checkpoint parameter '" + t.name + "' has shape " + shape_str(t.value.shape()) +
                               ", model expects " + shape_str(it->second->value.shape()));
    }
    it->second->value = t.value;
    it->second->zero_grad();
    ++restored;
  }
  if (restored != params.size()) {
    throw FormatError("checkpoint provides " + std::to_string(restored) + " of " + std::to_string(params.size()) +
                      " model parameters");
  }
}

inline void check_compatible(const ModelConfig& stored, const ModelConfig& expected) {
  ModelConfig a = stored;
  ModelConfig b = expected;
  a.dropout_rate = b.dropout_rate = 0.0;
  if (!(a == b)) {
    throw ConfigCompatibilityError("checkpoint holds a " + to_string(stored.kind) + " model (hidden " +
                                   std::to_string(stored.hidden) + ", input " + std::to_string(stored.input_dim) +
                                   "), expected " + to_string(expected.kind) + " (hidden " +
                                   std::to_string(expected.hidden) + ", input " + std::to_string(expected.input_dim) +
                                   ")");
  }
}

}  // namespace detail

/// Step model stored in `ck`; when `expected` is given its architecture must match.
inline StepModel restore_step_model(const Checkpoint& ck, const std::optional<ModelConfig>& expected = std::nullopt) {
  if (expected) detail::check_compatible(ck.config, *expected);
  StepModel m = build_model(ck.config, 0);
  detail::restore_params(ck, m.parameters(), {});
  return m;
}

/// Backbone stored in `ck`, ignoring any head parameters.
inline Backbone restore_backbone(const Checkpoint& ck, const std::optional<ModelConfig>& expected = std::nullopt) {
  if (expected) detail::check_compatible(ck.config, *expected);
  Backbone b = build_backbone(ck.config, 0);
  detail::restore_params(ck, b.parameters(), {kSesoHeadPrefix, "head."});
  return b;
}

}  // namespace tsan_lab
