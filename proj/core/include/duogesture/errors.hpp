#pragma once

#include <stdexcept>
#include <string>

namespace duogesture {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument values (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent data (CLI exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes that do not match an operation's contract.
class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

/// Binary array header carries the wrong magic bytes.
class MagicMismatchError : public DataError {
 public:
  using DataError::DataError;
};

/// Binary array payload length disagrees with the header shape.
class PayloadMismatchError : public DataError {
 public:
  using DataError::DataError;
};

/// Manifest and array inventory disagree.
class ManifestMismatchError : public DataError {
 public:
  using DataError::DataError;
};

/// Non-finite loss or similar numeric breakdown (CLI exit code 4).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace duogesture
