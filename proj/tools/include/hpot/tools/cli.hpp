#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hpot::tools {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitNumerical = 2;

// Entry point of the `hpot` tool. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hpot::tools
