#pragma once

#include <stdexcept>
#include <string>

namespace tireid {

// Invalid input: domain, configuration, or contract violation.
// The CLI maps this to exit code 2.
class InvalidInput : public std::runtime_error {
 public:
  explicit InvalidInput(const std::string& what) : std::runtime_error(what) {}
};

// Runtime numeric failure: divergence, NaN loss, unstable rollout.
// The CLI maps this to exit code 3.
class NumericFailure : public std::runtime_error {
 public:
  explicit NumericFailure(const std::string& what) : std::runtime_error(what) {}
};

// Pure-pursuit ran out of path before the requested duration.
class PathExhausted : public InvalidInput {
 public:
  explicit PathExhausted(const std::string& what) : InvalidInput(what) {}
};

}  // namespace tireid
