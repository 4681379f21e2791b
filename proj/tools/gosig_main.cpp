// Thin argument parser over the driver functions; all behavior lives in the
// library so tests can exercise it without spawning this binary.
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gosig/driver.hpp"

int main(int argc, char** argv) {
    CLI::App app{"aggregate-signature consensus simulator"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "simulate a scenario across seeds");
    gosig::driver::RunManifest manifest;
    std::string seed_spec;
    run->add_option("--scenario", manifest.scenario_path, "scenario config file")
        ->required();
    run->add_option("--seed,--seeds", seed_spec,
                    "seed, comma list, or inclusive range like 1..100 "
                    "(default: the scenario's seed)");
    run->add_option("--out", manifest.out_dir, "output directory (default: out)");
    run->add_option("--monitors", manifest.monitors,
                    "monitors to run (default: all)")
        ->delimiter(',');
    run->add_option("--format", manifest.format, "report format: text or jsonl")
        ->check(CLI::IsMember({"text", "jsonl"}));

    // check
    auto* check = app.add_subcommand("check", "replay monitors over a stored trace");
    std::string trace_path;
    std::string check_format = "text";
    check->add_option("trace", trace_path, "trace file (jsonl)")->required();
    check->add_option("--format", check_format, "report format: text or jsonl")
        ->check(CLI::IsMember({"text", "jsonl"}));

    // sigsize
    auto* sigsize = app.add_subcommand("sigsize", "multi-signature size arithmetic");
    std::uint64_t n = 1000;
    std::uint64_t sig_bits = 2048;
    std::uint64_t counter_bits = 32;
    sigsize->add_option("--n", n, "committee size")->required();
    sigsize->add_option("--sig-bits", sig_bits, "base signature width (default 2048)");
    sigsize->add_option("--counter-bits", counter_bits, "per-player counter width (default 32)");

    // sortition-stats
    auto* sortition = app.add_subcommand("sortition-stats", "empirical no-leader fraction");
    std::uint32_t sn = 100;
    std::uint32_t q_num = 7;
    std::uint64_t rounds = 100000;
    std::uint64_t seed = 1;
    sortition->add_option("--n", sn, "committee size")->required();
    sortition->add_option("--q-num", q_num, "leader threshold numerator (default 7)");
    sortition->add_option("--rounds", rounds, "independent rounds to draw (default 100000)");
    sortition->add_option("--seed", seed, "key generation seed");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        if (!seed_spec.empty()) {
            try {
                manifest.seeds = gosig::driver::parse_seed_spec(seed_spec);
            } catch (const std::invalid_argument& e) {
                std::cerr << "error: " << e.what() << '\n';
                return 2;
            }
        }
        return gosig::driver::cmd_run(manifest, std::cout, std::cerr);
    }
    if (check->parsed())
        return gosig::driver::cmd_check(trace_path, check_format, std::cout, std::cerr);
    if (sigsize->parsed())
        return gosig::driver::cmd_sigsize(n, sig_bits, counter_bits, std::cout, std::cerr);
    return gosig::driver::cmd_sortition_stats(sn, q_num, rounds, seed, std::cout, std::cerr);
}
