#pragma once

#include <stdexcept>
#include <string>

namespace rnnsec {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A value outside an operation's documented domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Invalid topology, training, generator or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (CSV rows, labels, class counts).
class DataError : public Error {
 public:
  using Error::Error;
};

// An API used in the wrong mode, e.g. backward through an inference cache.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Training diverged (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace rnnsec
