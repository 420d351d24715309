// SPDX-License-Identifier: Apache-2.0
//
// Subcommands of the `gsd` tool. Every command writes into one output
// directory, finishes with manifest.json, and is byte-for-byte reproducible
// for a fixed config and seed.
#pragma once

#include "gsd/analysis.hpp"
#include "gsd/cli/config.hpp"

#include <filesystem>
#include <ostream>
#include <vector>

namespace gsd::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitIo = 3,
    kExitAssert = 4,
    kExitDivergence = 5,
};

struct CommandContext {
    RunConfig config;
    std::filesystem::path out_dir;
    bool assert_mode = false;
    std::ostream* log = nullptr;  // progress and verdict lines
};

struct StatsOptions {
    std::vector<NoiseStrategy> strategies;  // empty: the config's list
    bool assert_crossview = false;
};

struct OptimizeOptions {
    bool wall_time = false;  // adds a timing column, which breaks byte-identity
};

/// The functions below return an exit code for assertion outcomes and throw
/// for config, I/O and divergence failures; run_cli maps both to exit codes.
int gen_noise(const CommandContext& ctx);
int stats(const CommandContext& ctx, const StatsOptions& options);
int warp_check(const CommandContext& ctx);
int optimize(const CommandContext& ctx, const OptimizeOptions& options);

/// Entry point: parses arguments and never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gsd::cli
