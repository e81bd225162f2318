#ifndef SUPERBRANCH_CLI_HPP
#define SUPERBRANCH_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace superbranch::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  ok = 0,
  refused = 2, // validation or certification refusal
  solver_failure = 3,
  io_failure = 4,
  usage = 64,
};

/// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

} // namespace superbranch::cli

#endif
