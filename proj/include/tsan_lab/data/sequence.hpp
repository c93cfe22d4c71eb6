// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The tsan-lab Authors
 *
 * @file   sequence.hpp
 * @brief  Per-second feature sequences and the .sfm file format.
 *
 * .sfm layout (all integers little-endian):
 *
 *   "SFM1"            4 bytes magic
 *   u32 version       = 1
 *   u64 L, u64 N
 *   u8 has_labels, u8 has_relevance
 *   [L x u8 labels]       if has_labels
 *   [L x u8 relevance]    if has_relevance, 0 or 1
 *   L*N x f32 features    row-major
 *
 * Features are stored as 32-bit floats, so a sequence round-trips bit-exactly
 * when its feature values are representable as float (the generator emits
 * only such values).
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tsan_lab/binary_io.hpp"
#include "tsan_lab/numerics/tensor.hpp"

namespace tsan_lab {

struct FeatureSequence {
  std::string id;
  Tensor features;  // L x N
  std::optional<std::vector<int>> labels;
  std::optional<std::vector<bool>> relevance;

  [[nodiscard]] std::size_t length() const { return features.rows(); }
  [[nodiscard]] std::size_t width() const { return features.cols(); }

  void validate() const {
    if (features.rank() != 2) throw ShapeError(id + ": features must be an L x N matrix");
    if (labels && labels->size() != length()) {
      throw ShapeError(id + ": " + std::to_string(labels->size()) + " labels for " + std::to_string(length()) +
                       " seconds");
    }
    if (relevance && relevance->size() != length()) {
      throw ShapeError(id + ": relevance mask length " + std::to_string(relevance->size()) + " differs from " +
                       std::to_string(length()));
    }
  }

  friend bool operator==(const FeatureSequence&, const FeatureSequence&) = default;
};

using Dataset = std::vector<FeatureSequence>;

/// Rows `keep` of a sequence, with labels and relevance kept aligned.
inline FeatureSequence select_rows(const FeatureSequence& s, const std::vector<std::size_t>& keep) {
  if (keep.empty()) throw ShapeError(s.id + ": row selection is empty");
  FeatureSequence out;
  out.id = s.id;
  const std::size_t n = s.width();
  std::vector<double> data;
  data.reserve(keep.size() * n);
  for (auto r : keep) {
    const auto row = s.features.data().subspan(r * n, n);
    data.insert(data.end(), row.begin(), row.end());
  }
  out.features = Tensor({keep.size(), n}, std::move(data));
  if (s.labels) {
    out.labels.emplace();
    for (auto r : keep) out.labels->push_back((*s.labels)[r]);
  }
  if (s.relevance) {
    out.relevance.emplace();
    for (auto r : keep) out.relevance->push_back((*s.relevance)[r]);
  }
  return out;
}

inline constexpr std::string_view kSfmMagic = "SFM1";
inline constexpr std::uint32_t kSfmVersion = 1;

inline std::vector<char> encode_sequence(const FeatureSequence& s) {
  s.validate();
  io::ByteWriter w;
  w.put_bytes(kSfmMagic);
  w.put(kSfmVersion);
  w.put(static_cast<std::uint64_t>(s.length()));
  w.put(static_cast<std::uint64_t>(s.width()));
  w.put(static_cast<std::uint8_t>(s.labels ? 1 : 0));
  w.put(static_cast<std::uint8_t>(s.relevance ? 1 : 0));
  if (s.labels) {
    for (int y : *s.labels) {
      if (y < 0 || y > 255) throw IndexError(s.id + ": label " + std::to_string(y) + " does not fit in a byte");
      w.put(static_cast<std::uint8_t>(y));
    }
  }
  if (s.relevance) {
    for (bool r : *s.relevance) w.put(static_cast<std::uint8_t>(r ? 1 : 0));
  }
  for (double v : s.features.data()) w.put_f32(static_cast<float>(v));
  return w.bytes();
}

inline FeatureSequence decode_sequence(std::vector<char> bytes, std::string id, std::string origin = {}) {
  if (origin.empty()) origin = id;
  io::ByteReader r(std::move(bytes), origin);
  const std::string& where = r.origin();
  if (r.take(kSfmMagic.size(), "magic") != kSfmMagic) throw BadMagicError(where + ": not an SFM1 file (bad magic)");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kSfmVersion) {
    throw VersionMismatchError(where + ": unsupported SFM version " + std::to_string(version));
  }
  const auto length = r.get<std::uint64_t>("L");
  const auto width = r.get<std::uint64_t>("N");
  if (length == 0 || width == 0) throw FormatError(where + ": empty sequence (L or N is zero)");
  const auto has_labels = r.get<std::uint8_t>("has_labels");
  const auto has_relevance = r.get<std::uint8_t>("has_relevance");
  if (has_labels > 1 || has_relevance > 1) throw FormatError(where + ": flag bytes must be 0 or 1");

  // Cheap size check before allocating, so a corrupt header cannot request huge buffers.
  const std::uint64_t needed = (has_labels ? length : 0) + (has_relevance ? length : 0) + length * width * 4;
  if (needed > r.remaining()) {
    throw TruncatedError(where + ": declares L=" + std::to_string(length) + ", N=" + std::to_string(width) + " but only " +
                         std::to_string(r.remaining()) + " payload bytes are present");
  }

  FeatureSequence s;
  s.id = id;
  if (has_labels) {
    s.labels.emplace();
    for (std::uint64_t t = 0; t < length; ++t) s.labels->push_back(r.get<std::uint8_t>("labels"));
  }
  if (has_relevance) {
    s.relevance.emplace();
    for (std::uint64_t t = 0; t < length; ++t) {
      const auto v = r.get<std::uint8_t>("relevance");
      if (v > 1) throw FormatError(where + ": relevance byte must be 0 or 1");
      s.relevance->push_back(v == 1);
    }
  }
  std::vector<double> data(length * width);
  for (auto& v : data) v = r.get_f32("features");
  if (r.remaining() != 0) throw FormatError(where + ": " + std::to_string(r.remaining()) + " trailing bytes");
  s.features = Tensor({length, width}, std::move(data));
  return s;
}

inline void write_sequence(const std::filesystem::path& path, const FeatureSequence& s) {
  io::write_file_atomic(path, encode_sequence(s));
}

/// The sequence id is the file stem.
inline FeatureSequence read_sequence(const std::filesystem::path& path) {
  return decode_sequence(io::read_file(path), path.stem().string(), path.string());
}

}  // namespace tsan_lab
