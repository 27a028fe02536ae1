#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tcmm/gradcheck.hpp"

namespace tcmm {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitInputError = 2, kExitNumericFailure = 3 };

/// Entry point shared by the tcmm executable and the tests. `args` excludes
/// the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Body of `tcmm gradcheck`: prints the report, returns kExitOk or
/// kExitCheckFailed, naming each failing component on `err`.
int gradcheck_command(const GradcheckOptions& options, std::ostream& out, std::ostream& err);

}  // namespace tcmm
