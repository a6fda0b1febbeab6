#pragma once

#include <iosfwd>

namespace rbfpdm::cli {

/// Entry point of the `rbfpdm` tool. Subcommands: gen-data, optimize,
/// evaluate, reconstruct. Returns 0 on success, 1 on runtime failure and 2 on
/// a usage error.
int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

}  // namespace rbfpdm::cli
