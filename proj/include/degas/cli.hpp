#pragma once

#include <ostream>

namespace degas {

/// Entry point of the `degas` tool. Returns the process exit code; errors are
/// reported as one line on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace degas
