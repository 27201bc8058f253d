#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace spdfuse {

/// Exit codes: 0 ok, 1 usage, 2 data error, 3 numerical error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spdfuse
