#pragma once

#include <string>

namespace stga {

/// Process exit codes of the `stga` tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitModelFailure = 1,
  kExitConfigError = 2,
  kExitIoError = 3,
};

/// Entry point of the command-line tool; returns the process exit code.
int run_cli(int argc, const char* const* argv);

/// File-system friendly form of a report row name ("D tree Classifier" -> "D_tree_Classifier").
std::string file_stem(const std::string& name);

}  // namespace stga
