#pragma once

#include <stdexcept>
#include <string>

namespace orbitfilter {

/// Base exception for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Shape, divisibility or length violations.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration values, unknown keys, out-of-range settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed files: pixmaps, model containers.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace orbitfilter
