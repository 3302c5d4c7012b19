#pragma once

#include <iosfwd>

namespace mubsep {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;          // not detected, or validation passed
inline constexpr int kExitFailed = 1;      // validation failed
inline constexpr int kExitUsage = 2;       // usage or parse error
inline constexpr int kExitEntangled = 3;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mubsep
