#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stlforge {

// Input rejected: bad syntax, unknown names, inconsistent dimensions or config.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t position)
      : ValidationError(what + " at position " + std::to_string(position)),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// Numeric evaluation left the domain of an operation (ln of a negative number,
// division by zero, non-finite gradient, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stlforge
