#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace softorgan::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kFailure = 1;
inline constexpr int kUnstable = 3;

// Entry point of the `softorgan` tool; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace softorgan::cli
