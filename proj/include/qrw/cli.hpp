#pragma once

#include <iosfwd>

namespace qrw {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitCheckFailed = 4;

// Entry point for `qrw prepare|train|rewrite|evaluate|gradcheck`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qrw
