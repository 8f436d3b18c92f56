#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace csiwb::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kRuntimeFailure = 1;
inline constexpr int kUsageError = 2;

/// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace csiwb::cli
