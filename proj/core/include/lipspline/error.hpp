#pragma once

#include <stdexcept>
#include <string>

namespace lipspline {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or operator dimensions do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN/Inf, diverged, or received invalid numeric input.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-supplied configuration or argument.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A stability certificate could not be issued because its preconditions failed.
class CertificateRefused : public Error {
 public:
  using Error::Error;
};

}  // namespace lipspline
