#pragma once

#include <iosfwd>

namespace csanet::cli {

// Entry point of the `csanet` tool. Returns the process exit code:
// 0 success, 1 usage error, 2 data/format/config error, 3 numerical failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace csanet::cli
