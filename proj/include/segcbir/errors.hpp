#pragma once

#include <stdexcept>
#include <string>

namespace segcbir {

/// Input outside an operation's domain (bad value range, unknown id, empty set).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Index file with the wrong magic bytes or an unsupported version.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Index file that is truncated or internally inconsistent.
class CorruptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Image that could not be read or decoded.
class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace segcbir
