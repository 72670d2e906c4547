#pragma once

#include <string>
#include <vector>

namespace tempomap {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

int run_cli(int argc, const char* const* argv);
// args excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace tempomap
