#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mcov {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitNumeric = 1,
  kExitInput = 2,
  kExitDomain = 3,
  kExitVerdict = 4,
  kExitCalibration = 5,
};

/// Runs the `mcov` command line; `args` excludes the program name.
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace mcov
