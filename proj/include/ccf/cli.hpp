#pragma once

#include <string>
#include <vector>

namespace ccf::cli {

/// Runs one CLI invocation; args exclude the program name.
/// Exit codes: 0 success, 1 runtime/data error, 2 usage error.
int run(std::vector<std::string> args);

int run(int argc, const char* const* argv);

}  // namespace ccf::cli
