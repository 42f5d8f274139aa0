#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace maskforge::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kDataError = 2;
inline constexpr int kInternal = 3;

/// Runs one `maskforge` invocation; args[0] is the program name.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace maskforge::cli
