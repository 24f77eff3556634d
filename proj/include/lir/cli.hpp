#pragma once

#include <string>

namespace lir {

inline constexpr const char* kVersion = "0.1.0";

/// Dispatches a lirlab command line. Returns the process exit code:
/// 0 success, 1 tolerance violation or validation failure, 2 usage error.
int run_cli(int argc, char** argv);

}  // namespace lir
