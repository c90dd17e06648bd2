#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace npmv::cli {

/// Exit statuses of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/**
 * Runs one command line (program name excluded) and returns its exit status.
 *
 * Failures print a single machine-readable line `npmv-error category=<tag>`
 * to `err`, followed by a human-readable message.
 */
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace npmv::cli
