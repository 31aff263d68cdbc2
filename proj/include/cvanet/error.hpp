#pragma once

#include <stdexcept>
#include <string>

namespace cvanet {

/// Malformed scenario input. Message carries the location (line or row).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid clustering / run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// API misuse: out-of-order accumulation, illegal status transition.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RunCancelled : public std::runtime_error {
 public:
  RunCancelled() : std::runtime_error("run cancelled") {}
};

/// A clustering invariant failed during a run. Never expected in practice.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cvanet
