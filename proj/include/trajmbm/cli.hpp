#pragma once

namespace trajmbm::cli {

/// Batch front end: loads a config (file or preset), applies flag overrides,
/// runs the Monte Carlo experiment and writes the result files.
/// Exit codes: 0 success, 1 invalid arguments or config values, 2 unreadable
/// config file.
int run(int argc, const char* const* argv);

}  // namespace trajmbm::cli
