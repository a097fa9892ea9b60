// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sqish {

/// Invalid numeric argument (non-finite input, non-positive gamma, bad label...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Shape mismatch, stale cache or other misuse of the network structure.
class StructuralError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed IDX file. Carries the byte offset at which parsing failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// The finite-difference oracle could not evaluate its target.
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing or unreadable data files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training diverged (NaN/Inf loss).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sqish
