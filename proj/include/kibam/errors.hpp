#pragma once

#include <stdexcept>
#include <string>

namespace kibam {

/// Base of every error raised by the library. Domain failures (unsolvable
/// instances, diverged fits, dead batteries) derive from this directly;
/// malformed input derives from InputError so front ends can tell the two
/// apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

#define KIBAM_DECLARE_ERROR(Name, Base) \
  class Name : public Base {            \
   public:                              \
    using Base::Base;                   \
  }

KIBAM_DECLARE_ERROR(ParseError, InputError);
KIBAM_DECLARE_ERROR(InvalidArgument, InputError);

}  // namespace kibam
