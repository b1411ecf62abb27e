#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace posemfa {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

inline constexpr const char* kToolVersion = "0.1.0";

/// Runs the command-line tool. `args` excludes the program name. Normal
/// output goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

int run_cli(int argc, char** argv);

}  // namespace posemfa
