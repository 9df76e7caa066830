#pragma once

#include <iosfwd>

namespace krigmorph::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitParse = 3;
inline constexpr int kExitNumerical = 4;

/// Runs the command-line front end. Results go to `out`, diagnostics and
/// logs to `err`. Returns the process exit code.
int run(int argc, const char *const *argv, std::ostream &out,
        std::ostream &err);

} // namespace krigmorph::cli
