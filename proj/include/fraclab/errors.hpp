#pragma once

#include <stdexcept>
#include <string>

namespace fraclab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller-side contract broken (bad scale, malformed input, overflow).
struct PreconditionError : Error {
  using Error::Error;
};

// A mathematical hypothesis of a checker does not hold on the given data.
struct HypothesisError : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

}  // namespace fraclab
