#pragma once

#include <stdexcept>
#include <string>

namespace decnn {

/// Base for every error the library raises on bad input or misuse.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor/parameter shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A hyperparameter or argument is outside its domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input data violates its contract (labels, spans, corpora).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. Carries the offending line when known.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked in the wrong state (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Stored hash does not match the data it guards.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Caller asked for something the current configuration does not support.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure (missing file, unwritable path).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace decnn
