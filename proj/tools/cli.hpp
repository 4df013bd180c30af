#pragma once

#include <ostream>

namespace agenteval {

// Exit codes of the `agenteval` command.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitValidation = 2,  // also not-found and conflict
    kExitBackend = 3,     // also `run --strict` with failures
    kExitStorage = 4,
};

// Runs one CLI invocation. Output goes to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace agenteval
