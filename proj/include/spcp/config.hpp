#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <type_traits>

// Scalar and index widths are fixed at build time. Both default to 64 bits.
#ifndef SPCP_REAL_TYPE
#define SPCP_REAL_TYPE double
#endif

#ifndef SPCP_ORDINAL_TYPE
#define SPCP_ORDINAL_TYPE std::size_t
#endif

namespace spcp {

using real_t = SPCP_REAL_TYPE;
using ordinal_t = SPCP_ORDINAL_TYPE;

static_assert(std::is_floating_point_v<real_t>, "SPCP_REAL_TYPE must be a floating-point type");
static_assert(std::is_unsigned_v<ordinal_t>, "SPCP_ORDINAL_TYPE must be an unsigned integer type");

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes, modes or lengths that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input text that cannot be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown (singular systems, zero-norm data).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace spcp
