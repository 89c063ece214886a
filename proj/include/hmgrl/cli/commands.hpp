#pragma once

#include <ostream>

namespace hmgrl::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,  // bad flags, config, paths or file contents
  kExitNumerical = 2,   // non-finite values or failed gradient check
};

/// Entry point of the `hmgrl` tool. Progress goes to `out` as JSON lines,
/// errors to `err` as a single JSON line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hmgrl::cli
