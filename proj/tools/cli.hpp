#pragma once

#include <ostream>

namespace kappa::cli {

/// Entry point of the kappa_ica executable. Returns the process exit code:
/// 0 success, 2 usage error, 1 runtime error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Applies KAPPA_ICA_LOG (trace|debug|info|warn|error|off) and routes log
/// output to stderr.
void configure_logging();

}  // namespace kappa::cli
