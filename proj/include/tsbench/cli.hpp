#pragma once

#include <iosfwd>

namespace tsbench::cli {

enum ExitCode : int {
  ok = 0,
  failure = 1,
  config_error = 2,
  gate_failed = 3,
  endpoint_failed = 4,
};

/// The `tsbench` command. Progress goes to `log`; outputs go to files.
int run(int argc, const char* const* argv, std::ostream& log);

}  // namespace tsbench::cli
