#pragma once

#include <stdexcept>
#include <string>

namespace qrot {

// Base of every error raised by the library. Callers that only need to
// distinguish "bad input" from "the computation could not proceed" can
// catch ValidationError vs. Error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid arguments, violated type invariants, bad config values.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. line() is 1-based, 0 when not line-oriented.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : ValidationError(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// All particle weights vanished after an update.
class DegeneratePosterior : public Error {
 public:
  using Error::Error;
};

// Resultant vector of the angular coordinate is too short for a mean.
class UndefinedMean : public Error {
 public:
  using Error::Error;
};

// Closed-form Fisher information evaluated where it is singular.
class SingularFormula : public Error {
 public:
  using Error::Error;
};

// Weighted parameter carries no information anywhere on the feasible set.
class UnboundedObjective : public Error {
 public:
  using Error::Error;
};

// Replay pool has no outcomes left for the requested key.
class PoolExhausted : public Error {
 public:
  using Error::Error;
};

// Bootstrap needs at least two values.
class UndefinedInterval : public Error {
 public:
  using Error::Error;
};

}  // namespace qrot
