#pragma once

#include <stdexcept>
#include <string>

namespace mhqa {

// Every failure the library reports derives from Error. The CLI maps the
// subclasses onto exit codes (see pipeline.hpp).
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
  public:
    using Error::Error;
};

class ValidationError : public Error {
  public:
    using Error::Error;
};

class AlignmentError : public Error {
  public:
    using Error::Error;
};

class ShapeError : public Error {
  public:
    using Error::Error;
};

class NumericError : public Error {
  public:
    using Error::Error;
};

class PrerequisiteError : public Error {
  public:
    using Error::Error;
};

class CorruptionError : public Error {
  public:
    using Error::Error;
};

}  // namespace mhqa
