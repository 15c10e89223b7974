#pragma once

#include <stdexcept>
#include <string>

namespace cmle {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The dimension rule s-r <= t <= r (or r < 1, s < r) failed; message names
// the violated inequality.
struct DimensionRuleViolated : Error {
  using Error::Error;
};

// A callback produced NaN/Inf where a finite value was required.
struct NonFiniteEvaluation : Error {
  using Error::Error;
};

struct NotPositiveDefinite : Error {
  using Error::Error;
};

struct RankDeficient : Error {
  using Error::Error;
};

struct NegativeVariance : Error {
  using Error::Error;
};

struct SingularSystem : Error {
  using Error::Error;
};

struct LeftDomain : Error {
  using Error::Error;
};

// Counts-file syntax error; message carries the line number.
struct ParseError : Error {
  using Error::Error;
};

}  // namespace cmle
