#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace endonoise::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1; // module error, reported as "error: <kind>: <message>"
inline constexpr int kExitUsage = 2;   // bad flags or config

// Runs one invocation. args[0] is the program name. Data goes to `out`,
// logs and the error line to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Names of all subcommands, in the order --help lists them.
std::vector<std::string> subcommand_names();

} // namespace endonoise::cli
