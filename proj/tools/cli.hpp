#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bemf::cli {

/// Parses arguments and dispatches a subcommand. Returns the process exit code:
/// 0 success, 1 validation error, 2 runtime or numeric failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bemf::cli
