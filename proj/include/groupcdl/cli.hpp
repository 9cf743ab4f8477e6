#pragma once

#include <iosfwd>

namespace groupcdl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one command (denoise, learn-dict, bench, adjacency-dump). Returns 0 on
/// success, 1 on usage or validation errors, 2 on runtime failures.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace groupcdl::cli
