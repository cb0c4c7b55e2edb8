#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sinkprobe::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kDataError = 3,
  kMissingCapability = 4,
};

/// Runs one subcommand. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sinkprobe::cli
