#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tactile::cli {

// Exit codes.
constexpr int kOk = 0;
constexpr int kInvalidArguments = 2;
constexpr int kRuntimeFailure = 3;

// Runs one command line (args exclude the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tactile::cli
