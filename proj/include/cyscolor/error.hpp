#pragma once

#include <stdexcept>
#include <string>

namespace cys {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An input violated a documented precondition (range, length, vocabulary).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// Fewer than five candidates survived deduplication.
class CurationUnderflow : public Error {
 public:
  using Error::Error;
};

/// A training loss became non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace cys
