#pragma once

#include <stdexcept>
#include <string>

namespace factorsde {

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  not_symmetric,
  not_positive_definite,
  untestable,
  simulation_diverged,
  fit_failed,
  config,
  io,
};

const char* to_string(ErrorCode code) noexcept;

/// Exception type thrown by every factorsde entry point. The code lets
/// callers (the CLI in particular) map failures onto stable exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace factorsde
