// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The tsan-lab Authors
 *
 * @file   config.hpp
 * @brief  "key = value" run-config text format.
 *
 * One assignment per line; '#' starts a comment; blank lines are ignored.
 * Keys may appear once. Consumers read typed values through ConfigReader
 * and call finish(), which rejects any key nobody asked for.
 */
#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tsan_lab/binary_io.hpp"
#include "tsan_lab/error.hpp"

namespace tsan_lab {

using ConfigMap = std::map<std::string, std::string>;

namespace detail {
inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}
}  // namespace detail

inline ConfigMap parse_config_text(std::string_view text, const std::string& origin = "config") {
  ConfigMap out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string value(detail::trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    if (!out.emplace(key, value).second) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

inline ConfigMap read_config_file(const std::filesystem::path& path) {
  std::vector<char> bytes;
  try {
    bytes = io::read_file(path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  return parse_config_text(std::string_view(bytes.data(), bytes.size()), path.string());
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline std::string format_config(const ConfigMap& map) {
  std::string out;
  for (const auto& [k, v] : map) out += k + " = " + v + "\n";
  return out;
}

/// Typed access to a ConfigMap that remembers which keys were consumed.
class ConfigReader {
 public:
  explicit ConfigReader(ConfigMap map, std::string origin = "config") : map_(std::move(map)), origin_(std::move(origin)) {}

  [[nodiscard]] bool has(const std::string& key) const { return map_.contains(key); }

  std::string get_string(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    auto it = map_.find(key);
    return it == map_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) {
    used_.insert(key);
    auto it = map_.find(key);
    if (it == map_.end()) return fallback;
    try {
      std::size_t idx = 0;
      const double v = std::stod(it->second, &idx);
      if (idx != it->second.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": '" + key + "' expects a number, got '" + it->second + "'");
    }
  }

  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) {
    used_.insert(key);
    auto it = map_.find(key);
    if (it == map_.end()) return fallback;
    return parse_uint(key, it->second);
  }

  bool get_bool(const std::string& key, bool fallback) {
    used_.insert(key);
    auto it = map_.find(key);
    if (it == map_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError(origin_ + ": '" + key + "' expects true or false, got '" + it->second + "'");
  }

  /// Comma-separated unsigned integers.
  std::vector<std::uint64_t> get_uint_list(const std::string& key, std::vector<std::uint64_t> fallback) {
    used_.insert(key);
    auto it = map_.find(key);
    if (it == map_.end()) return fallback;
    std::vector<std::uint64_t> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_uint(key, std::string(detail::trim(item))));
    if (out.empty()) throw ConfigError(origin_ + ": '" + key + "' is an empty list");
    return out;
  }

  /// Throws ConfigError naming every key that was never read.
  void finish() const {
    std::string unknown;
    for (const auto& [k, v] : map_) {
      if (!used_.contains(k)) unknown += (unknown.empty() ? "" : ", ") + k;
    }
    if (!unknown.empty()) throw ConfigError(origin_ + ": unknown key(s): " + unknown);
  }

 private:
  std::uint64_t parse_uint(const std::string& key, const std::string& s) const {
    std::uint64_t v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end || s.empty()) {
      throw ConfigError(origin_ + ": '" + key + "' expects a non-negative integer, got '" + s + "'");
    }
    return v;
  }

  ConfigMap map_;
  std::string origin_;
  std::set<std::string> used_;
};

}  // namespace tsan_lab
