#pragma once

#include <stdexcept>
#include <string>

namespace garnn {

enum class ErrorCode {
  shape_mismatch,    // tensor/primitive shape contract violated
  invalid_argument,  // bad value (negative tolerance, empty list, ...)
  non_finite,        // NaN/Inf produced where finite values are required
  csv_parse,         // malformed CSV input (message cites the row)
  config,            // unknown/invalid configuration key or value
  io,                // file could not be read/written
  diverged,          // training loss became non-finite
};

const char* error_code_name(ErrorCode code);

/// All module-level rejections surface as this type; the CLI maps
/// code() to a machine-parsable token on exit.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace garnn
