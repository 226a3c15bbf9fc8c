#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace transit_robust {

using Minutes = std::int64_t;
using StationId = std::int32_t;
using EdgeId = std::int32_t;
using LineId = std::int32_t;
using TripId = std::int32_t;
using EventId = std::int32_t;
using ActivityId = std::int32_t;
using GroupId = std::int32_t;

inline constexpr std::int32_t kNoId = -1;
inline constexpr Minutes kUnbounded = std::numeric_limits<Minutes>::max() / 4;
inline constexpr Minutes kNoTime = std::numeric_limits<Minutes>::min();

// Input violates a documented precondition (exit code 1 in the CLI).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reading or writing files failed (exit code 2 in the CLI).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mathematical modulo, result in [0, m).
inline constexpr Minutes floor_mod(Minutes a, Minutes m) {
  Minutes r = a % m;
  return r < 0 ? r + m : r;
}

inline constexpr Minutes ceil_div(Minutes a, Minutes b) {
  // b > 0
  Minutes q = a / b;
  if ((a % b != 0) && (a > 0)) ++q;
  return q;
}

}  // namespace transit_robust
