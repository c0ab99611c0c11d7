#pragma once

#include <string>
#include <vector>

namespace rits::cli {

/// Subcommands: simulate, replay, gen-data, serve, export-cs. Returns the
/// process exit code; diagnostics go to stderr.
int run(int argc, char** argv);
/// Same, with the arguments after the program name.
int run(const std::vector<std::string>& args);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rits::cli
