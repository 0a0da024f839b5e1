#pragma once

// Command-line front end. Exit codes: 0 success, 1 unexpected failure,
// 2 configuration or I/O error, 3 non-convergence, 4 untestable k.

#include <iosfwd>

namespace factorsde::cli {

enum ExitCode : int {
  kSuccess = 0,
  kFailure = 1,
  kConfigError = 2,
  kNotConverged = 3,
  kUntestable = 4,
};

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace factorsde::cli
