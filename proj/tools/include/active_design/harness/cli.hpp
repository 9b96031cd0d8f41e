#pragma once

namespace active_design::harness {

/// Subcommands solve, simulate, sweep, verify, geometry. Returns 0 on success,
/// 1 on usage or validation errors, 2 on runtime failures.
int cli_main(int argc, char** argv);

}  // namespace active_design::harness
