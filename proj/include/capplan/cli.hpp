#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace capplan::cli {

/// Runs one subcommand. `args` excludes the program name. Results go to
/// files named by --output (or `out`), diagnostics to `err`. Returns the
/// process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace capplan::cli
