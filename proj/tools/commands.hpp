#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace biasaudit::cli {

// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "BIASAUDIT_OUT_DIR";

// Entry point shared by the executable and the tests. args excludes the
// program name. Returns the process exit status: 0 on success (including
// "Bias Detected"), 1 on operational failure, 2 on usage errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace biasaudit::cli
