#pragma once

#include <stdexcept>
#include <string>

namespace visback {

enum class ErrorCode {
  shape,      // tensor dimension mismatch
  config,     // inconsistent network configuration
  range,      // argument outside its admissible range
  format,     // bad magic, version or malformed file content
  truncated,  // file ended early
  checksum,   // CRC mismatch
  io,         // file system failure
  numerical,  // NaN/Inf or divergence
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Dimension mismatch along a named axis ("channels", "height", "width", "length", ...).
class ShapeError : public Error {
 public:
  ShapeError(std::string axis, long expected, long actual, const std::string& context)
      : Error(ErrorCode::shape, context + ": " + axis + " mismatch (expected " +
                                    std::to_string(expected) + ", got " + std::to_string(actual) + ")"),
        axis_(std::move(axis)),
        expected_(expected),
        actual_(actual) {}

  const std::string& axis() const noexcept { return axis_; }
  long expected() const noexcept { return expected_; }
  long actual() const noexcept { return actual_; }

 private:
  std::string axis_;
  long expected_;
  long actual_;
};

}  // namespace visback
