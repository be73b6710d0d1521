// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace taskadc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

// Subcommands: design, simulate, sweep, rate-search.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace taskadc::cli
