#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ccd::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,    // bad flags, unknown command, invalid configuration
  kData = 3,     // unreadable or malformed input files
  kNumeric = 4,  // training diverged
};

struct Environment {
  /// Base for relative data paths; CCD_DATA_DIR in the process environment.
  std::optional<std::filesystem::path> data_dir;

  static Environment from_process();
};

/// Runs one command. `args` excludes the program name. Results go to `out`,
/// diagnostics and usage text to `err`; never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const Environment& env = Environment::from_process());

}  // namespace ccd::cli
