#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fruitloc/error.hpp"

namespace fruitloc::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitPrecondition = 3,
  kExitBackend = 4,
  kExitIo = 5,
};

int exit_code_for(ErrorCode code);

// Entry point of the `fruitloc` tool; args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fruitloc::cli
