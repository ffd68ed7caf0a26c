#pragma once

#include <stdexcept>
#include <string>

namespace ablate {

// Scenario or file content failed a structural check (exit code 2).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Initial state violates the constraint, or a generator produced nothing to cut (exit code 3).
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateScenarioError : public InfeasibleError {
 public:
  using InfeasibleError::InfeasibleError;
};

// Malformed input file (exit code 4).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ablate
