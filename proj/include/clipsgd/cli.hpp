#pragma once

namespace clipsgd {

/// Entry point of the clipsgd tool. Exit codes: 0 success, 1 invalid input
/// (config, flags, parameters), 2 runtime failure or failed bound check.
int run_cli(int argc, char** argv);

}  // namespace clipsgd
