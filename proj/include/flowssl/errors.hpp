#pragma once

#include <stdexcept>
#include <string>

namespace flowssl {

// Base of every error the toolkit throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument or configuration value was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed input file (scenario, CSV, PPM).
class ParseError : public Error {
 public:
  using Error::Error;
};

// The data is well-formed but cannot support the requested computation.
class DegenerateData : public Error {
 public:
  using Error::Error;
};

// Rank-deficient design matrix, e.g. collinear flow samples.
class DegenerateGeometry : public DegenerateData {
 public:
  using DegenerateData::DegenerateData;
};

}  // namespace flowssl
