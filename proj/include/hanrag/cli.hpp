#pragma once

#include <iosfwd>

namespace hanrag {

// Entry point for the hanrag command-line tool. Returns the process exit
// code: 0 on success, 1 on a runtime failure, 2 on a usage error.
int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hanrag
