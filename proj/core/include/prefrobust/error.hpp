#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prefrobust {

/// Malformed or out-of-domain input (bad file, bad config value, bad argument).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Reward-expression syntax error. `position()` is a 0-based byte offset into the source.
class ParseError : public InputError {
 public:
  ParseError(const std::string& message, std::size_t position)
      : InputError(message + " at position " + std::to_string(position)), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// A loss, gradient or parameter became non-finite, or an internal numeric identity broke.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A modelling assumption does not hold (e.g. a non-indexable arm).
class ModelAssumptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace prefrobust
