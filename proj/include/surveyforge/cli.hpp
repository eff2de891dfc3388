#pragma once

#include <string>
#include <vector>

namespace surveyforge::cli {

enum ExitCode : int {
    kOk = 0,
    kRuntimeFailure = 1,
    kConfigError = 2,
    kMissingArtifact = 3,
};

/// Runs `surveyforge <subcommand> --config <path> [--out <dir>] [--seed <n>]`.
/// args excludes the program name. Returns the process exit code.
int run(const std::vector<std::string> &args);

} // namespace surveyforge::cli
