#pragma once

#include <stdexcept>
#include <string>

namespace dwp {

/// Precondition violated by the caller (wrong length, unsupported order, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input is well-formed but degenerate (all-zero field, coincident abscissae).
class DegenerateInputError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical procedure could not produce a trustworthy answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration is inconsistent (MCS mismatch, missing model files, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// On-disk artifact is malformed (bad magic, CRC mismatch, truncated).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two result sets cannot be compared (no common SNR range or group).
class ComparisonError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dwp
