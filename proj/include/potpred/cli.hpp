#pragma once

#include <iosfwd>

namespace potpred::cli {

enum ExitCode : int { kOk = 0, kIoFailure = 2, kValidation = 3, kNumericFailure = 4 };

/**
 * @brief Runs one command line (argv[0] is the program name).
 *
 * Reports go to the --out file (written atomically) or to out; diagnostics
 * go to err. Returns an ExitCode.
 */
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace potpred::cli
