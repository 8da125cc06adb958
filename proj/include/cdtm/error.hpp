#pragma once

#include <stdexcept>
#include <string>

namespace cdtm {

// Argument outside the mathematical domain of a function (e.g. digamma(0)).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Invalid configuration value (negative lambda, K < 2, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input data that cannot be used: empty corpora, malformed files, OOV-only documents.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cdtm
