#pragma once

#include <stdexcept>
#include <string>

namespace dsc {

// Base class for all engine errors. Subclasses map onto CLI exit codes,
// see tools/dsc_main.cpp.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape disagreement. Messages name both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced, or fed to, a numeric kernel.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Bad input data: labels out of range, undecodable image, empty dataset.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid run configuration or network spec.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Filesystem failure while reading or writing artifacts.
class IoError : public Error {
 public:
  using Error::Error;
};

// API misuse: backward on a non-scalar, evaluate on an empty set.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Checkpoint unreadable or inconsistent with the requested network/data.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace dsc
