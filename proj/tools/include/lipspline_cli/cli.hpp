#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lipspline::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kNumericError = 2, kCertificateRefused = 3 };

/// Parses argv and runs one subcommand. Messages go to `out` and `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace lipspline::cli
