#pragma once

#include <ostream>

namespace burstcast {

inline constexpr const char* kToolVersion = "0.1.0";

/// Runs one subcommand. Returns 0 on success, 1 on a usage error and 2 on a
/// data or validation error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Oracle suites behind `selftest`; prints one PASS/FAIL line per suite.
bool run_selftest(std::ostream& out);

}  // namespace burstcast
