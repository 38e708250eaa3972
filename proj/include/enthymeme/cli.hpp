#pragma once

#include <string>
#include <vector>

namespace enthymeme::cli {

// Runs one subcommand and returns the process exit code (0 ok, 2 usage,
// 3 data, 4 backend). Never throws.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace enthymeme::cli
