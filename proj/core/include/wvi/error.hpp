#pragma once

#include <stdexcept>
#include <string>

namespace wvi {

// Incompatible tensor shapes or dimensions.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside an operation's mathematical domain (log of a negative, division by ~0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Operation exists but is not supported in the requested mode (e.g. tape-tracked min).
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Loss or gradient became non-finite, or a kernel underflowed.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unreadable file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration value.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace wvi
