#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace discont::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kFormat = 5,
  kNumeric = 6,
};

inline constexpr const char* kSeedEnv = "DISCONT_SEED";

// `args` excludes the program name.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Config keys, defaults and exit codes appended to every --help page.
std::string help_footer();

}  // namespace discont::cli
