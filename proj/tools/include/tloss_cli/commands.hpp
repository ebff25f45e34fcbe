#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tloss::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitUsage = 2,
  kExitIo = 3,
};

/// Runs one `tloss` invocation. `args` excludes the program name. Normal
/// output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tloss::cli
