#pragma once

#include <stdexcept>
#include <string>

namespace shuffledp {

// A distribution kind that cannot be split into n iid summands of the same
// family (or whose parameters are not divisible by n).
class NotDivisible : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation asked of a kind it is not defined for (e.g. a compound-Poisson
// decomposition of a signed distribution).
class UnsupportedKind : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// No parameter in the searched range satisfies the privacy constraint.
class Infeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A bisection or bracketing search could not pin down a root in its budget.
class BracketFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file or config.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace shuffledp
