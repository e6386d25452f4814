#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cellmetry::cli {

/// Runs one invocation; `args` excludes the program name. Returns the process
/// exit code: 0 success, 1 domain error (`ERROR <code>: <message>` on err), 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cellmetry::cli
