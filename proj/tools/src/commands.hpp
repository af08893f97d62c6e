#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

namespace prefrobust::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitInput = 2,
  kExitNumeric = 3,
  kExitModelAssumption = 4,
};

/// Runs `prefrobust <args...>` in-process. `args` excludes the program name. Errors are
/// reported on `err` and mapped to exit codes; nothing is thrown.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Writes the message of `error` to `err` and returns its exit code.
int report_error(std::exception_ptr error, std::ostream& err);

/// Applies PREFROBUST_LOG (error, info or debug; default info) to a stderr logger.
void configure_logging();

}  // namespace prefrobust::cli
