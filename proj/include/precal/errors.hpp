#pragma once

#include <stdexcept>
#include <string>

namespace precal {

// Base classes map onto the CLI exit categories: ConfigError -> 2,
// DataError -> 3, NumericError -> 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotPositiveDefinite : NumericError {
  using NumericError::NumericError;
};

struct NotConverged : NumericError {
  using NumericError::NumericError;
};

struct DimensionMismatch : NumericError {
  using NumericError::NumericError;
};

struct TooFewSamples : NumericError {
  using NumericError::NumericError;
};

struct IndexOutOfRange : NumericError {
  using NumericError::NumericError;
};

struct DegenerateVector : NumericError {
  using NumericError::NumericError;
};

struct DensityUnavailable : NumericError {
  using NumericError::NumericError;
};

struct NoSamples : NumericError {
  using NumericError::NumericError;
};

struct EmptySampleSet : NumericError {
  using NumericError::NumericError;
};

struct UnregisteredPrimitive : NumericError {
  using NumericError::NumericError;
};

struct NonFiniteValue : NumericError {
  using NumericError::NumericError;
};

struct NonFiniteLoss : NumericError {
  using NumericError::NumericError;
};

struct DimensionTooSmall : NumericError {
  using NumericError::NumericError;
};

struct IndexOverlap : NumericError {
  using NumericError::NumericError;
};

struct MissingColumn : DataError {
  using DataError::DataError;
};

struct NonNumericCell : DataError {
  using DataError::DataError;
};

struct EmptyFile : DataError {
  using DataError::DataError;
};

}  // namespace precal
