#pragma once

#include <stdexcept>
#include <string>

namespace groupcdl {

/// Shapes of operands do not fit together (channels, spatial dims, stride).
class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or Inf appeared inside an iterative computation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A request would exceed a configured resource budget (e.g. adjacency memory).
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problems decoding a serialized parameter file.
class FormatError : public std::runtime_error {
 public:
  enum class Kind { Io, Magic, Version, Checksum, Invariant };

  FormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace groupcdl
