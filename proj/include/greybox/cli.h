#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace greybox {

/// Exit codes of the command-line tool.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

/// Runs one command. `args` excludes the program name.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_dispatch(int argc, char** argv);

}  // namespace greybox
