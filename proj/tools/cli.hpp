#pragma once

#include <iosfwd>

namespace hyperutil::cli {

// Entry point for the `hyperutil` command line. Returns the process exit
// code; 0 only when every output file was written.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hyperutil::cli
