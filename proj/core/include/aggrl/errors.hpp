#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aggrl {

/// Invalid parameters, dimension mismatches, malformed configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation invoked in a state where it is not allowed.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Scenario placement could not be satisfied within the rejection bound.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unexpected bytes on the experience wire.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace aggrl
