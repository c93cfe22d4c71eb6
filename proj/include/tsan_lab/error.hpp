// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The tsan-lab Authors
 *
 * @file   error.hpp
 * @brief  Exception hierarchy shared by every tsan-lab module.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace tsan_lab {

/// Tensor shape or layer width disagreement.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Class index or label outside its valid range.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Invalid configuration value or unknown configuration key. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed on-disk data (sequence files, manifests, checkpoints). Maps to CLI exit code 3.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

class UnknownParameterError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ShapeMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// A checkpoint whose model configuration does not match the requested one.
class ConfigCompatibilityError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace tsan_lab
