#pragma once

#include <stdexcept>

namespace mpvit {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument outside its documented domain.
class ValueError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced while checked mode is on.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration (presets, flags, config files).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Dataset content that violates its contract (missing splits, single class, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace mpvit
