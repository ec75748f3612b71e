#pragma once

#include <stdexcept>
#include <string>

namespace rangeloc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix passed as a rotation is not orthonormal with determinant +1.
class InvalidRotation : public Error {
 public:
  using Error::Error;
};

/// A range factor was evaluated with the robot on top of its anchor.
class SingularGeometry : public Error {
 public:
  using Error::Error;
};

/// Duplicate nodes, dangling edge references, dimension mismatches.
class GraphError : public Error {
 public:
  using Error::Error;
};

/// Out-of-order timestamps, unknown anchors, missing streams.
class StreamError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// Feasible-set sampler rejected (almost) every proposal.
class SamplingFailure : public Error {
 public:
  using Error::Error;
};

/// Global log-coordinate chart left its valid domain during a pose solve.
class PoseChartError : public Error {
 public:
  using Error::Error;
};

/// Fewer than four non-coplanar anchors are available.
class InsufficientGeometry : public Error {
 public:
  using Error::Error;
};

}  // namespace rangeloc
