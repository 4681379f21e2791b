// Command-line driver: scenario runs, seed sweeps, offline trace checking,
// size arithmetic.  Everything here is a plain function over streams so the
// binary stays a thin argument parser and tests can drive the real code
// paths without spawning processes.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gosig/monitor.hpp"

namespace gosig::driver {

// A resolved invocation.  The canonical JSON form of this struct is embedded
// verbatim in every trace (meta record) and report it produces.
struct RunManifest {
    std::string scenario_path;
    std::vector<std::uint64_t> seeds;
    std::string out_dir = "out";
    std::vector<std::string> monitors;  // empty = all
    std::string format = "text";        // "text" or "jsonl"
};

std::string manifest_json(const RunManifest& m);

// "42", "1..100" (inclusive range) or "3,9,2" (kept in given order).
// Throws std::invalid_argument on anything else.
std::vector<std::uint64_t> parse_seed_spec(const std::string& spec);

inline constexpr const char* monitor_names[] = {"no_fork", "tc_after_commit", "liveness",
                                                "metrics"};

struct SeedOutcome {
    std::uint64_t seed = 0;
    std::string trace_path;
    Hash256 trace_digest{};
    std::uint64_t trace_lines = 0;
    std::uint64_t commits = 0;
    std::uint64_t final_height = 0;
    bool safety_ok = true;
    monitor::LivenessVerdict liveness = monitor::LivenessVerdict::not_applicable;
};

// Exit codes shared by all subcommands: 0 clean, 1 safety violation,
// 2 configuration/input error.
int cmd_run(const RunManifest& m, std::ostream& out, std::ostream& err);

// Replays a stored trace through the monitor suite.  Reports parse errors
// (including truncation) with their 1-based line offset; a trace without a
// terminal end record counts as truncated.
int cmd_check(const std::string& trace_path, const std::string& format, std::ostream& out,
              std::ostream& err);

// Prints naive concatenated-signature bytes vs the aggregate footprint.
int cmd_sigsize(std::uint64_t n, std::uint64_t sig_bits, std::uint64_t counter_bits,
                std::ostream& out, std::ostream& err);

// Draws `rounds` independent sortition rounds and prints the empirical
// no-leader fraction next to the analytic (1 - q)^N.
int cmd_sortition_stats(std::uint32_t n, std::uint32_t q_numerator, std::uint64_t rounds,
                        std::uint64_t seed, std::ostream& out, std::ostream& err);

}  // namespace gosig::driver
