#pragma once

namespace seganet {

// Dispatches the seganet subcommands. Returns 0 on success, 1 on usage
// errors, 2 on data errors, 3 on numeric failures.
int run_cli(int argc, const char* const* argv);

}  // namespace seganet
