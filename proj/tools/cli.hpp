#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fibermc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Runs the command line `args` (args[0] is the program name) and returns the
/// process exit code. Diagnostics go to `err`, help text to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fibermc::cli
