#pragma once

#include <stdexcept>
#include <string>

namespace freehand {

enum class ErrorCode {
  invalid_input,
  insufficient_data,
  degenerate_geometry,
  degenerate_signal,
  invalid_landmark,
  format,
  size_mismatch,
  validation,
  schema,
  parse,
  io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid input";
    case ErrorCode::insufficient_data: return "insufficient data";
    case ErrorCode::degenerate_geometry: return "degenerate geometry";
    case ErrorCode::degenerate_signal: return "degenerate signal";
    case ErrorCode::invalid_landmark: return "invalid landmark";
    case ErrorCode::format: return "format error";
    case ErrorCode::size_mismatch: return "size mismatch";
    case ErrorCode::validation: return "validation error";
    case ErrorCode::schema: return "schema error";
    case ErrorCode::parse: return "parse error";
    case ErrorCode::io: return "i/o error";
  }
  return "error";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace freehand
