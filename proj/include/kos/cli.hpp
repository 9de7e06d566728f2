#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kos::cli {

// Entry point shared by the binary and the test suites.
// Exit codes: 0 success, 1 diagnostics, 2 unknown (budget exhausted),
// 3 replay divergence.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kos::cli
