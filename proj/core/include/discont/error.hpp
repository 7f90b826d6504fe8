#pragma once

#include <stdexcept>
#include <string>

namespace discont {

// Root of every error the library throws. Callers that only care about
// "something went wrong inside discont" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that do not compose (channel mismatch, wrong spatial size...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Shapes an operation refuses by definition (e.g. rotating a non-square image).
class UnsupportedShapeError : public DimensionError {
 public:
  using DimensionError::DimensionError;
};

// A caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value or combination of values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Binary file does not carry the expected magic / layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class UnsupportedDtypeError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Truncated payloads, size fields that disagree with the data, trailing bytes.
class CorruptionError : public FormatError {
 public:
  using FormatError::FormatError;
};

// A loss or parameter became NaN/Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace discont
