#pragma once

#include <iosfwd>

namespace vtree {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,
  kExitIo = 3,
  kExitFormat = 4,
  kExitTraining = 5,
};

/// Parses arguments and runs one subcommand (synth, train, predict, eval,
/// bench, export-dot). Diagnostics go to `err`; results go to `out` unless an
/// --out path is given.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vtree
