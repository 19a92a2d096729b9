#pragma once

#include <stdexcept>
#include <string>

namespace coopcast {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// geometry
struct InsufficientMatches : Error {
  using Error::Error;
};
struct DegenerateConfiguration : Error {
  using Error::Error;
};
struct NoConsensus : Error {
  using Error::Error;
};
struct CheiralityAmbiguous : Error {
  using Error::Error;
};
struct NonPositiveDistance : Error {
  using Error::Error;
};
struct FrameMismatch : Error {
  using Error::Error;
};

// scene
struct EmptyScene : Error {
  using Error::Error;
};

// forecaster
struct ShapeMismatch : Error {
  using Error::Error;
};
struct NonFiniteLoss : Error {
  NonFiniteLoss(const std::string& what, int batch) : Error(what), batch_index(batch) {}
  int batch_index;
};
struct DegenerateN : Error {
  using Error::Error;
};

// metrics
struct LengthMismatch : Error {
  using Error::Error;
};
struct SingularCovariance : Error {
  using Error::Error;
};

// data / io
struct ParseError : Error {
  ParseError(const std::string& what, int line_no) : Error(what), line(line_no) {}
  int line;
};
struct EmptyFile : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

}  // namespace coopcast
