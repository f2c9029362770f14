#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace camforge {

// Full command-line entry point, in-process testable. `args` excludes the
// program name. Returns the process exit code: 0 success, 1 runtime failure,
// 2 usage error.
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

} // namespace camforge
