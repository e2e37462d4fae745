#pragma once

#include <string>
#include <vector>

namespace mcs {

/// Exit codes of the command-line driver.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,   // unexpected failure
  kExitUsage = 2,      // unknown subcommand/flag, bad flag value
  kExitConfig = 3,     // invalid config file or values
  kExitIo = 4,         // cannot read or write a file
  kExitData = 5,       // corrupt file/checkpoint, shape or mask errors
  kExitDiverged = 6,   // non-finite training loss or gradient
};

int run(int argc, char** argv);
int run(const std::vector<std::string>& args);  // args exclude the program name

}  // namespace mcs
