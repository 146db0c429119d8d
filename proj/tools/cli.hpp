#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace markovpg::cli {

// Runs one invocation of the markovpg tool. `args` excludes the program name.
// Returns the process exit status; usage and validation problems go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace markovpg::cli
