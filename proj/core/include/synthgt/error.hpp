// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace synthgt {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes do not conform for a primitive.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value or layout parameter.
class ConfigError : public Error {
 public:
  ConfigError(std::string key_path, const std::string& message)
      : Error(key_path.empty() ? message : key_path + ": " + message),
        key_path_(std::move(key_path)) {}
  explicit ConfigError(const std::string& message) : ConfigError("", message) {}

  const std::string& key_path() const { return key_path_; }

 private:
  std::string key_path_;
};

class ImputationError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

// Optimization diverged (NaN/Inf loss) or a training contract broke.
class TrainingError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage failed; wraps the underlying message with its location.
class StageError : public Error {
 public:
  StageError(std::string stage, int fold, const std::string& message)
      : Error((fold >= 0 ? "fold " + std::to_string(fold) + ", " : std::string()) + "stage " + stage +
              ": " + message),
        stage_(std::move(stage)),
        fold_(fold) {}

  const std::string& stage() const { return stage_; }
  int fold() const { return fold_; }

 private:
  std::string stage_;
  int fold_;
};

}  // namespace synthgt
