#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sizer::cli {

enum ExitCode { kOk = 0, kError = 1, kUsage = 2, kBudget = 3, kStalled = 4 };

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sizer::cli
