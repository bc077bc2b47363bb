#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace bregdistill {

// Exit codes: 0 success, 1 runtime or numeric failure, 2 usage error.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2 };

// Runs one command. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bregdistill
