#pragma once

#include "gcmi/error.hpp"

namespace gcmi {

enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_data = 2,
    exit_numeric = 3,
};

ExitCode exit_code_for(ErrorKind kind);

// Entry point of the `gcmi` executable. Diagnostics go to stderr.
int cli_main(int argc, const char* const* argv);

} // namespace gcmi
