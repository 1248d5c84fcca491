#pragma once

#include <stdexcept>
#include <string>

namespace mmn {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operand shapes or feature dimensions do not agree.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// A Cholesky factorization hit a nonpositive (or non-finite) pivot.
class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

// A precondition on an argument value failed (empty input, bad cutoff,
// invalid layout or spec, mismatched lengths).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Requested hidden layer does not exist.
class LayerOutOfRange : public Error {
 public:
  using Error::Error;
};

// Not enough data to compute the requested statistic.
class InsufficientData : public Error {
 public:
  using Error::Error;
};

// A training loss or gradient became NaN/Inf.
class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

// Failure reading or writing a file.
class IoError : public Error {
 public:
  using Error::Error;
};

// File contents do not match the expected binary layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Malformed text input (CSV cell, config value).
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmn
