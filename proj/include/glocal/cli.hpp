#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace glocal::cli {

// Runs one command line (program name excluded) and returns the exit code.
// Headline metrics go to `out`; failures are reported on `err` as one JSON
// object {"error": {"kind": ..., "message": ...}}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace glocal::cli
