#pragma once

#include <iosfwd>

namespace invpricing {

enum ExitCode : int {
  kExitOk = 0,
  kExitOther = 1,
  kExitInvalid = 2,
  kExitNoSolution = 3,
  kExitVerification = 4,
};

/// Entry point of the `invpricing` tool; returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace invpricing
