#pragma once

#include <stdexcept>
#include <string>

namespace cryopose {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor shape or dtype mismatch.
struct ShapeError : Error {
  using Error::Error;
};

/// Autodiff tape misuse (backward before forward, mixing tapes, ...).
struct GraphError : Error {
  using Error::Error;
};

/// Invalid configuration or CLI usage. Maps to exit code 1.
struct ConfigError : Error {
  using Error::Error;
};

/// Inputs disagree (grid mismatch, schema mismatch). Maps to exit code 2.
struct DataError : Error {
  using Error::Error;
};

/// Non-finite values where finite ones are required. Maps to exit code 3.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace cryopose

#define CP_CHECK(cond, exc, msg)       \
  do {                                 \
    if (!(cond)) throw exc(msg);       \
  } while (0)

#define CP_CHECK_SHAPE(cond, msg) CP_CHECK(cond, ::cryopose::ShapeError, msg)
#define CP_CHECK_GRAPH(cond, msg) CP_CHECK(cond, ::cryopose::GraphError, msg)
