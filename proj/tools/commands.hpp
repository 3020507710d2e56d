#pragma once

#include <string>
#include <vector>

namespace contdyn::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalError = 3, kAssertFailed = 4 };

// Full command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace contdyn::cli
