#pragma once

#include <stdexcept>
#include <string>

namespace agman {

// Error categories. Kept in sync with the agman_status codes of the C API.
enum class ErrorCode {
  ok = 0,
  argument = 1,    // bad argument from the caller (index out of range, unknown id, ...)
  parse = 2,       // malformed file content (manifest line, checkpoint container)
  validation = 3,  // well-formed but inconsistent data (label out of range, shape mismatch)
  io = 4,          // missing file, unreadable/unwritable path
  sampling = 5,    // unsatisfiable triplet pool
  config = 6,      // invalid configuration value or key
  degenerate = 7,  // degenerate numeric input (zero-norm embedding)
  state = 8,       // operation invalid for the current model state (e.g. ASA disabled)
  internal = 9,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

struct ArgumentError : Error {
  explicit ArgumentError(const std::string& m) : Error(ErrorCode::argument, m) {}
};
struct ParseError : Error {
  explicit ParseError(const std::string& m) : Error(ErrorCode::parse, m) {}
};
struct ValidationError : Error {
  explicit ValidationError(const std::string& m) : Error(ErrorCode::validation, m) {}
};
struct IoError : Error {
  explicit IoError(const std::string& m) : Error(ErrorCode::io, m) {}
};
struct SamplingError : Error {
  explicit SamplingError(const std::string& m) : Error(ErrorCode::sampling, m) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorCode::config, m) {}
};
struct DegenerateInputError : Error {
  explicit DegenerateInputError(const std::string& m) : Error(ErrorCode::degenerate, m) {}
};
struct StateError : Error {
  explicit StateError(const std::string& m) : Error(ErrorCode::state, m) {}
};

}  // namespace agman
