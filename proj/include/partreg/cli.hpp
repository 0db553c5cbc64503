#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace partreg {

enum ExitCode : int {
  kExitOk = 0,
  kExitInvalidInput = 2,  // bad flags, missing or malformed files
  kExitComputeError = 3,  // degenerate geometry, failed checks, internal errors
};

/// Batch front-end. `args` excludes the program name.
///
/// Subcommands: gen-model, gen-pose, regress, eval, refdepth, rasterize,
/// gradcheck, loss. Global flags: --seed, --template, --out-dir,
/// --format {json,csv}.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, const char* const* argv);

}  // namespace partreg
