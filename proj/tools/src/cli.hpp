#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace deann::cli {

enum ExitCode : int { Ok = 0, Failure = 1, InvalidArgs = 2, Infeasible = 3 };

/// Runs the command line (without the program name). Results go to `out`,
/// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace deann::cli
