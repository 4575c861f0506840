#pragma once

#include <stdexcept>
#include <string>

namespace venation {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad paths, out-of-range options, inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dataset layout or content problems (empty class, too-small class...).
class DataError : public Error {
 public:
  using Error::Error;
};

// A single file could not be decoded. Carries the offending path.
class DecodeError : public Error {
 public:
  explicit DecodeError(std::string path)
      : Error("cannot decode image: " + path), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Mismatched dimensions between two operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Optimization failures (non-finite loss, empty stream, I/O during training).
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Evaluation quantities that are undefined for the given input,
// e.g. a ROC curve for a class with no negatives.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace venation
