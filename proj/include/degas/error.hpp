#pragma once

#include <stdexcept>
#include <string>

namespace degas {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an operation receives tensors of incompatible shape.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Raised when a forward pass sees NaN or Inf on its inputs.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Raised for malformed config files, genotypes, datasets and checkpoints.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace degas
