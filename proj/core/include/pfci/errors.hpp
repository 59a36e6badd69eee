#pragma once

#include <stdexcept>
#include <string>

namespace pfci {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed magic, header or payload encoding.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Payload length disagrees with the declared dimensions.
class SizeMismatchError : public Error {
 public:
  using Error::Error;
};

/// A value lies outside its admissible envelope.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Operand dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or numeric parameter.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Empty or otherwise unusable training/evaluation data.
class DataError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public DataError {
 public:
  using DataError::DataError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A case appears in both the training and the test partition of a fold.
class LeakageError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf in a loss or activation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Wraps a failure inside one pipeline stage and names the stage.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace pfci
