#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pift {

enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_invariant = 2, exit_numeric = 3 };

// Full command line handling; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pift
