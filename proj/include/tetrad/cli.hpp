#pragma once

#include <ostream>

namespace tetrad {

// Exit codes: 0 success, 1 usage or validation error, 2 IO or integrity error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tetrad
