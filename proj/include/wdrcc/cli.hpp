#pragma once

namespace wdrcc {

// Batch front end. Subcommands: trace, apxbd, solve-opf, oos. Every
// run writes its artifact plus a <artifact>.manifest.json recording
// the command, the configuration snapshot, seeds, and timings, so any
// output can be reproduced from its manifest alone.
//
// Exit codes: 0 success, 1 usage or input errors, 2 the model is
// infeasible or unbounded, 3 the solver failed numerically.
int run_cli(int argc, const char* const* argv);

}  // namespace wdrcc
