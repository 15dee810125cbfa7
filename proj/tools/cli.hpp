#pragma once

#include <string>
#include <vector>

namespace veil::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kDataError = 2,
    kNotConverged = 3,
};

// Runs one command line (args[0] is the program name) and returns the exit code.
int run(const std::vector<std::string>& args);

}  // namespace veil::cli
