#pragma once

#include <stdexcept>
#include <string>

namespace sgad {

// Base exception for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Raised by the preprocessing pipeline when GrabCut finds nothing to keep,
// even after the histogram-equalized retry.
class NoForegroundError : public Error {
 public:
  NoForegroundError() : Error("no foreground") {}
};

// Non-finite values encountered during optimisation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Usage/config problems; the CLI maps these to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

#define SGAD_REQUIRE(cond, ExcType, msg) \
  do {                                   \
    if (!(cond)) throw ExcType(msg);     \
  } while (0)

}  // namespace sgad
