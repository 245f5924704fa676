#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ssimgen {

/// Runs the ssimgen command line. `args` excludes the program name.
/// Returns 0 on success, 2 on usage or input errors, 3 on numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ssimgen
