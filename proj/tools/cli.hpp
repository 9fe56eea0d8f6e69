#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mpvit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command. `args` excludes the program name. Results go to `out`;
/// diagnostics to `err` and the log. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Reads a flat key=value file ('#' starts a comment, blank lines ignored).
/// Throws ConfigError on a line without '=' or a repeated key.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& file);

}  // namespace mpvit::cli
