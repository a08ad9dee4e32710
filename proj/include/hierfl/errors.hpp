#pragma once

#include <stdexcept>
#include <string>

namespace hierfl {

// Mismatched shapes: vector dimensions, parameter counts.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A value outside the operation's domain (nonpositive sizes, empty sets...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Inconsistent experiment setup: schedule divisibility, partition feasibility.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hierfl
