#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace conolink::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitValidation = 2,
    kExitRuntime = 3,
};

/// Runs the command line `args` (without the program name). Regular output goes to
/// `out`, diagnostics and timing to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace conolink::cli
