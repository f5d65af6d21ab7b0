#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace confclust::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kIoError = 2, kConfigError = 3, kFitError = 4 };

/// Runs one command line (args[0] is the subcommand), writing progress to `out`
/// and diagnostics to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace confclust::cli
