#pragma once

#include <stdexcept>
#include <string>

namespace gridscan {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that violates a documented precondition (bad config, non-finite data,
/// mismatched dimensions).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. The message always carries the location.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// RReliefF cannot form weights because the sampled targets carry no spread.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// A stability oracle could not produce a finite index for a point.
class OracleFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace gridscan
