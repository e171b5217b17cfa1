#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace c3 {

/// Entry point of the `c3` command line tool. `args` excludes the program name.
/// Returns the process exit code: 0 on success, 1 on runtime failure,
/// 2 on usage errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace c3
