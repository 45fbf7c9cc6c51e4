#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dpgraph {

// Argument outside the mathematical domain of an operation (epsilon <= 0,
// lambda outside (0,1), non-finite input, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller broke an API contract (dimension mismatch, bad pair index, using a
// non-existent fit).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Input text could not be parsed or failed validation. line() is 1-based,
// 0 when the error is not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN or similar inside the solver. Signals a bug, not a statistical event.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dpgraph
