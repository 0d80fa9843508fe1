#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mnar {

/// Runs one command. Returns 0 on success, 1 on configuration errors or bad
/// usage, 2 on numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mnar
