#pragma once

#include <stdexcept>
#include <string>

namespace impugan {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes do not line up. The message names the offending node.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf was produced where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Input data is malformed (ragged CSV, unknown category, empty table, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Configuration is invalid. The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Training blew up; `snapshot` holds a JSON diagnostic of the last state.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::string snapshot)
      : Error(what), snapshot_(std::move(snapshot)) {}
  const std::string& snapshot() const noexcept { return snapshot_; }

 private:
  std::string snapshot_;
};

}  // namespace impugan
