#pragma once

#include <stdexcept>
#include <string>

namespace viewrec {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LengthMismatch : Error {
  using Error::Error;
};
struct EmptyInput : Error {
  using Error::Error;
};
struct DegenerateInput : Error {
  using Error::Error;
};
struct InconsistentDistances : Error {
  using Error::Error;
};
struct AnchorMismatch : Error {
  using Error::Error;
};
struct OutOfRange : Error {
  using Error::Error;
};
struct MalformedString : Error {
  using Error::Error;
};
struct SingularSystem : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

}  // namespace viewrec
