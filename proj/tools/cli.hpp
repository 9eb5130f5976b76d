#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace finsler::cli {

/// Exit codes: 0 all checks pass, 1 a check failed or an analysis was
/// refused, 2 usage or parse error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace finsler::cli
