#pragma once

#include <stdexcept>
#include <string>

namespace fpqsdc {

// Parameter or configuration value outside its documented range.
class InvariantError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed configuration file (missing file, bad JSON, wrong field type).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Point evaluated outside the support of a density or formula.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fpqsdc
