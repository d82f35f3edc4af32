#pragma once

#include <stdexcept>
#include <string>

namespace mfteam {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (bad JSON, missing keys, wrong value types).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Array dimensions that disagree with the declared model sizes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A configured enumeration or work cap would be exceeded.
class CapExceeded : public Error {
 public:
  using Error::Error;
};

/// Arguments that violate an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace mfteam
