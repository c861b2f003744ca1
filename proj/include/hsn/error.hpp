#pragma once

#include <stdexcept>
#include <string>

namespace hsn {

// Error categories map onto the CLI exit codes (2 geometry, 3 I/O, 4 numerical).

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or corrupt binary/text content (bad magic, version, checksum, parse).
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched tensor shapes, stream tags or configuration.
class ShapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace hsn
