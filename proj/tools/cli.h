#ifndef PRUNEKIT_TOOLS_CLI_H_
#define PRUNEKIT_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace prunekit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInvalidInput = 2;
inline constexpr int kExitInfeasible = 3;
inline constexpr int kExitIntegrity = 4;

// Runs one command line (args[0] is the program name). Human-readable output
// goes to `out`, diagnostics to `err`; the return value is the exit code.
int Run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace prunekit::cli

#endif  // PRUNEKIT_TOOLS_CLI_H_
