#pragma once

#include <stdexcept>
#include <string>

namespace tloss {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function (e.g. lgamma(0)).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Mismatched or invalid volume dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (MVOL, MPRM, manifest).
class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A loss or gradient became NaN/Inf during optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Metric requested on inputs where it is undefined (empty masks, zero denominators).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or command-line usage.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace tloss
