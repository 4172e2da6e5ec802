#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace duogesture::cli {

/// Process exit codes.
enum ExitCode : int {
  kSuccess = 0,
  kUsageOrConfig = 2,
  kDataError = 3,
  kNumericError = 4,
  kInternalError = 1,
};

/// Parses `args` (without the program name) and runs one subcommand. Reports go to
/// `out`, diagnostics and usage text to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace duogesture::cli
