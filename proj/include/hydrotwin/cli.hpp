#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hydrotwin {

/// Runs the hydrotwin command line. Machine-readable results go to `out`,
/// diagnostics to `err`; the return value is the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace hydrotwin
