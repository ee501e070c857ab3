#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace looming {

// Base for every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument was violated (bad dt, unordered thresholds,
// mismatched grids, non-dividing decimation factors, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Looming and rate quantities are undefined at zero range.
class UndefinedAtOrigin : public Error {
 public:
  using Error::Error;
};

// Level 0 has no equal-looming sphere: the locus t.p = 0 is a plane.
class NoFiniteSphere : public Error {
 public:
  using Error::Error;
};

// Malformed text or binary input. `location` is a byte offset or a 1-based
// line number depending on the format; `has_location` tells whether it is set.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t location = 0, bool has_location = false)
      : Error(what), location_(location), has_location_(has_location) {}

  std::size_t location() const noexcept { return location_; }
  bool has_location() const noexcept { return has_location_; }

 private:
  std::size_t location_;
  bool has_location_;
};

// Grid file header with the wrong magic or version.
class FormatError : public ParseError {
 public:
  using ParseError::ParseError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace looming
