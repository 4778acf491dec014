#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace framekit {

/// Raised when an input carries no usable signal (all-zero image or vector).
class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text or binary input. `location` is a 1-based line number for text formats
/// and a byte offset for binary ones.
class ParseError : public std::runtime_error {
 public:
  enum class Unit { Line, Byte };

  ParseError(const std::string& source, Unit unit, std::size_t location, const std::string& what)
      : std::runtime_error(source + ": " + (unit == Unit::Line ? "line " : "byte ") + std::to_string(location) +
                           ": " + what),
        unit_(unit),
        location_(location) {}

  [[nodiscard]] Unit unit() const { return unit_; }
  [[nodiscard]] std::size_t location() const { return location_; }

 private:
  Unit unit_;
  std::size_t location_;
};

}  // namespace framekit
