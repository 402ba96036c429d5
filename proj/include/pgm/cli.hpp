#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pgm {

/// Process exit codes of the batch front end.
enum ExitCode : int {
  exit_ok = 0,
  exit_validation = 2,  ///< malformed model, data, evidence or arguments
  exit_inference = 3,   ///< well-formed input with no answer (zero evidence, not a tree, ...)
  exit_usage = 64,      ///< unknown subcommand or flag
};

/// Runs one command line (without the program name). Results go to `out` as key=value lines or
/// CSV; the effective configuration is echoed to `err` as config.key=value lines, followed by any
/// warnings and error messages.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pgm
