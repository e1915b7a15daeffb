#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rmat {

// User-facing input problems (bad config, bad shapes, malformed files).
// The CLI maps these to exit code 1.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or axis mismatch in a tensor operation.
struct DimensionError : ValidationError {
  using ValidationError::ValidationError;
};

// Divergence, NaN propagation, exhausted step budgets.
// The CLI maps these to exit code 2.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed on-disk artifact; carries the byte offset where parsing failed.
struct ParseError : ValidationError {
  ParseError(std::size_t at, const std::string& what)
      : ValidationError("parse error at byte " + std::to_string(at) + ": " + what), offset(at) {}
  std::size_t offset;
};

}  // namespace rmat
