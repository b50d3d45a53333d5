#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace devmodel::cli {

enum Exit : int { kOk = 0, kModelFailure = 1, kUsage = 2 };

/// Runs one command. `args` excludes the program name. Reports go to `out`
/// (or --out), diagnostics and usage text to `err`.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace devmodel::cli
