#pragma once

#include <stdexcept>
#include <string>

namespace merc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform for the requested primitive.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced or consumed by an operation, or an iterative routine failed.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed input file (dataset, config, checkpoint). Message carries the location.
class ParseError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace merc
