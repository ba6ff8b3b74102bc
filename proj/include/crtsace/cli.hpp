// Command-line front end: simulate, fit, replicate.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace crtsace {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitData = 2,
  kExitNumerical = 3,
};

/// Runs one command. `args` excludes the program name. Output directory
/// defaults to $CRTSACE_OUT_DIR, else the current directory.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace crtsace
