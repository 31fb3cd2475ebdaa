// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <ostream>

#include "config.hpp"

namespace hma::cli {

enum ExitCode : int { kOk = 0, kInvariantFailed = 1, kNotConverged = 2, kConfigError = 3 };

/// Solves and writes u.bin or psi.bin, convergence.csv, summary.json,
/// timing.json and, for atomic problems, tiling.json / tiling.svg.
int run(const RunConfig& c, std::ostream& log);
/// Same solve, tiling artifacts only. Needs an atomic problem kind.
int export_tiling(const RunConfig& c, std::ostream& log);
/// Invariant suite on the configured model; writes verify.json.
int verify(const RunConfig& c, std::ostream& out);
/// Prints a summary of an output directory.
int report(const std::filesystem::path& dir, std::ostream& out);

}  // namespace hma::cli
