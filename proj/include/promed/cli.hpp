#pragma once

#include <string>
#include <vector>

namespace promed::cli {

// Entry point behind the `promed` binary. Exit codes: 0 success, 1 hard
// failure (any case failed), 2 configuration error.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace promed::cli
