/// @file cli.hpp
/// @brief Entry point of the `rec` command-line tool.
///
/// Exit codes: 0 success, 1 usage error, 2 validation failures present,
/// 3 backend or transport failure, 4 internal error, 130 interrupted.

#pragma once

#include <iosfwd>
#include <stop_token>
#include <string>
#include <vector>

namespace rec {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitValidation = 2,
    kExitBackend = 3,
    kExitInternal = 4,
    kExitInterrupted = 130,
};

/// `args` excludes the program name. `env` is consulted for REC_* variables
/// (pass nullptr to use the process environment).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::stop_token stop = {},
            const std::vector<std::pair<std::string, std::string>>* env = nullptr);

}  // namespace rec
