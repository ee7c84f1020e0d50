#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace csanet {

// Base of every error thrown by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A hyperparameter or option is invalid. `key()` names the offending
// configuration key when one is known.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, std::string key = {})
      : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Input data violates a precondition (bad label, unknown subject, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Malformed binary file. Carries the byte offset where decoding failed.
class FormatError : public DataError {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : DataError(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// NaN/Inf encountered, or a numerical check failed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A quantity is mathematically undefined for the given input (e.g. kappa
// with chance agreement of exactly one).
class UndefinedValueError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Object used out of order, e.g. an optimizer step without gradients.
class StateError : public Error {
 public:
  using Error::Error;
};

// Bad command-line usage.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace csanet
