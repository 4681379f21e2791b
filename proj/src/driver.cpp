#include "gosig/driver.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "gosig/sigagg.hpp"
#include "gosig/simnet.hpp"

namespace gosig::driver {

using nlohmann::json;

namespace {

std::uint64_t parse_u64(std::string_view s) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw std::invalid_argument("bad seed value: '" + std::string(s) + "'");
    return v;
}

bool known_monitor(const std::string& name) {
    for (const char* m : monitor_names)
        if (name == m) return true;
    return false;
}

bool enabled(const std::vector<std::string>& selected, const char* name) {
    return selected.empty() ||
           std::find(selected.begin(), selected.end(), name) != selected.end();
}

json annotate(const std::string& verdict_line, std::uint64_t seed) {
    json j = json::parse(verdict_line);
    j["seed"] = seed;
    return j;
}

const char* yesno(bool b) { return b ? "yes" : "NO"; }

void text_seed_row(std::ostream& os, const SeedOutcome& o, const monitor::MetricsReport& met) {
    os << std::setw(10) << o.seed << std::setw(10) << o.commits << std::setw(8)
       << o.final_height << std::setw(8) << yesno(o.safety_ok) << std::setw(15)
       << monitor::to_string(o.liveness);
    if (met.stage2.mean_us)
        os << std::setw(14) << std::fixed << std::setprecision(3)
           << static_cast<double>(*met.stage2.mean_us) / 1e6;
    else
        os << std::setw(14) << "-";
    os << std::setw(14) << met.max_bytes_sent << '\n';
}

}  // namespace

std::string manifest_json(const RunManifest& m) {
    json j{{"scenario", m.scenario_path},
           {"seeds", m.seeds},
           {"out_dir", m.out_dir},
           {"monitors", m.monitors},
           {"format", m.format}};
    return j.dump();
}

std::vector<std::uint64_t> parse_seed_spec(const std::string& spec) {
    if (spec.empty()) throw std::invalid_argument("empty seed spec");
    if (auto dots = spec.find(".."); dots != std::string::npos) {
        const std::uint64_t lo = parse_u64(spec.substr(0, dots));
        const std::uint64_t hi = parse_u64(spec.substr(dots + 2));
        if (hi < lo) throw std::invalid_argument("seed range is backwards: " + spec);
        std::vector<std::uint64_t> out;
        out.reserve(hi - lo + 1);
        for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
        return out;
    }
    std::vector<std::uint64_t> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_u64(item));
    if (out.empty()) throw std::invalid_argument("empty seed spec");
    return out;
}

int cmd_run(const RunManifest& m, std::ostream& out, std::ostream& err) {
    for (const auto& name : m.monitors)
        if (!known_monitor(name)) {
            err << "error: unknown monitor '" << name << "'\n";
            return 2;
        }
    scenario::ScenarioConfig base;
    try {
        base = scenario::load_config(m.scenario_path);
    } catch (const scenario::ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    RunManifest resolved = m;
    if (resolved.seeds.empty()) resolved.seeds = {base.seed};
    std::sort(resolved.seeds.begin(), resolved.seeds.end());
    resolved.seeds.erase(std::unique(resolved.seeds.begin(), resolved.seeds.end()),
                         resolved.seeds.end());
    const std::string manifest = manifest_json(resolved);

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(resolved.out_dir, ec);
    if (ec) {
        err << "error: cannot create output directory " << resolved.out_dir << ": "
            << ec.message() << '\n';
        return 2;
    }
    const bool jsonl = resolved.format == "jsonl";
    const fs::path report_path =
        fs::path(resolved.out_dir) / (jsonl ? "report.jsonl" : "report.txt");
    std::ofstream report(report_path, std::ios::binary | std::ios::trunc);
    if (!report) {
        err << "error: cannot write " << report_path.string() << '\n';
        return 2;
    }

    std::ostringstream body;
    if (jsonl) {
        body << json{{"kind", "manifest"}, {"manifest", manifest}}.dump() << '\n';
    } else {
        body << "manifest: " << manifest << '\n'
             << std::setw(10) << "seed" << std::setw(10) << "commits" << std::setw(8)
             << "height" << std::setw(8) << "safe" << std::setw(15) << "liveness"
             << std::setw(14) << "stage2_s" << std::setw(14) << "max_bytes" << '\n';
    }

    std::uint64_t violations = 0;
    std::uint64_t liveness_ok = 0;
    std::uint64_t total_commits = 0;
    for (const std::uint64_t seed : resolved.seeds) {
        scenario::ScenarioConfig cfg = base;
        cfg.seed = seed;
        const fs::path trace_path =
            fs::path(resolved.out_dir) / ("trace-" + std::to_string(seed) + ".jsonl");
        std::ofstream trace_file(trace_path, std::ios::binary | std::ios::trunc);
        if (!trace_file) {
            err << "error: cannot write " << trace_path.string() << '\n';
            return 2;
        }
        monitor::Monitors mon;
        simnet::RunOptions opts;
        opts.manifest_json = manifest;
        opts.trace_out = &trace_file;
        opts.sink = [&mon](const trace::Record& r) { mon.ingest(r); };
        simnet::RunResult res;
        try {
            res = simnet::run_scenario(cfg, opts);
        } catch (const scenario::ConfigError& e) {
            err << "error: " << e.what() << '\n';
            return 2;
        }

        SeedOutcome o;
        o.seed = seed;
        o.trace_path = trace_path.string();
        o.trace_digest = res.trace_digest;
        o.trace_lines = res.trace_lines;
        o.commits = res.total_commits;
        o.final_height = res.final_height;
        const auto fork = mon.no_fork();
        const auto tcc = mon.tc_after_commit();
        o.safety_ok = (!enabled(resolved.monitors, "no_fork") || fork.ok) &&
                      (!enabled(resolved.monitors, "tc_after_commit") || tcc.ok);
        const auto live = mon.liveness();
        o.liveness = live.verdict;
        const auto met = mon.metrics();

        if (!o.safety_ok) ++violations;
        if (o.liveness == monitor::LivenessVerdict::ok) ++liveness_ok;
        total_commits += o.commits;

        if (jsonl) {
            body << json{{"kind", "seed"},
                         {"seed", seed},
                         {"trace", o.trace_path},
                         {"digest", to_hex(o.trace_digest)},
                         {"lines", o.trace_lines},
                         {"commits", o.commits},
                         {"final_height", o.final_height},
                         {"safety_ok", o.safety_ok}}
                        .dump()
                 << '\n';
            if (enabled(resolved.monitors, "no_fork"))
                body << annotate(to_json_line(fork), seed).dump() << '\n';
            if (enabled(resolved.monitors, "tc_after_commit"))
                body << annotate(to_json_line(tcc), seed).dump() << '\n';
            if (enabled(resolved.monitors, "liveness"))
                body << annotate(to_json_line(live), seed).dump() << '\n';
            if (enabled(resolved.monitors, "metrics"))
                body << annotate(to_json_line(met), seed).dump() << '\n';
        } else {
            text_seed_row(body, o, met);
        }
    }

    if (jsonl) {
        body << json{{"kind", "summary"},
                     {"seeds", resolved.seeds.size()},
                     {"safety_violations", violations},
                     {"liveness_ok", liveness_ok},
                     {"total_commits", total_commits}}
                    .dump()
             << '\n';
    } else {
        body << "seeds " << resolved.seeds.size() << ", safety violations " << violations
             << ", liveness ok " << liveness_ok << ", total commits " << total_commits
             << '\n';
    }

    report << body.str();
    out << body.str();
    return violations ? 1 : 0;
}

int cmd_check(const std::string& trace_path, const std::string& format, std::ostream& out,
              std::ostream& err) {
    std::ifstream in(trace_path, std::ios::binary);
    if (!in) {
        err << "error: cannot open " << trace_path << '\n';
        return 2;
    }
    monitor::Monitors mon;
    trace::TraceReader reader(in);
    bool saw_end = false;
    try {
        while (auto rec = reader.next()) {
            saw_end = std::holds_alternative<trace::End>(*rec);
            mon.ingest(*rec);
        }
    } catch (const trace::TraceError& e) {
        err << "error: " << trace_path << ": " << e.what() << '\n';
        return 2;
    }
    if (mon.lines() == 0) {
        err << "error: " << trace_path << ": empty trace\n";
        return 2;
    }
    if (!saw_end) {
        err << "error: " << trace_path << ": truncated trace, no end record after line "
            << mon.lines() << '\n';
        return 2;
    }

    const auto fork = mon.no_fork();
    const auto tcc = mon.tc_after_commit();
    const auto live = mon.liveness();
    const auto met = mon.metrics();
    if (format == "jsonl") {
        out << to_json_line(fork) << '\n'
            << to_json_line(tcc) << '\n'
            << to_json_line(live) << '\n'
            << to_json_line(met) << '\n';
    } else {
        out << "trace:    " << trace_path << " (" << mon.lines() << " lines)\n"
            << "no_fork:  " << (fork.ok ? "ok" : "VIOLATION") << '\n'
            << "tc_after_commit: " << (tcc.ok ? "ok" : "VIOLATION") << '\n'
            << "liveness: " << monitor::to_string(live.verdict)
            << (live.note.empty() ? "" : " (" + live.note + ")") << '\n'
            << "rounds " << met.rounds << ", honest commits " << met.honest_commits
            << ", no-leader fraction " << std::fixed << std::setprecision(4)
            << met.no_leader_fraction << '\n';
    }
    return fork.ok && tcc.ok ? 0 : 1;
}

int cmd_sigsize(std::uint64_t n, std::uint64_t sig_bits, std::uint64_t counter_bits,
                std::ostream& out, std::ostream& err) {
    if (n == 0 || sig_bits == 0 || counter_bits == 0 || sig_bits % 8 || counter_bits % 8) {
        err << "error: sizes must be positive multiples of 8 bits\n";
        return 2;
    }
    const std::uint64_t naive = n * (sig_bits / 8);
    const std::uint64_t agg = sigagg::encoded_size(n, sig_bits, counter_bits);
    out << "players          " << std::setw(12) << n << '\n'
        << "naive bytes      " << std::setw(12) << naive << '\n'
        << "aggregate bytes  " << std::setw(12) << agg << '\n'
        << "ratio            " << std::setw(12) << std::fixed << std::setprecision(1)
        << static_cast<double>(naive) / static_cast<double>(agg) << "x\n";
    return 0;
}

int cmd_sortition_stats(std::uint32_t n, std::uint32_t q_numerator, std::uint64_t rounds,
                        std::uint64_t seed, std::ostream& out, std::ostream& err) {
    if (n == 0 || rounds == 0) {
        err << "error: need n > 0 and rounds > 0\n";
        return 2;
    }
    sigagg::SigScheme scheme(seed, n);
    sigagg::SortitionState st;
    st.q = sha256(std::string_view("sortition-stats"));
    st.height = 1;
    const double q = sigagg::leader_threshold(n, q_numerator);
    std::uint64_t no_leader = 0;
    for (std::uint64_t r = 1; r <= rounds; ++r) {
        bool any = false;
        for (std::uint32_t i = 0; i < n && !any; ++i)
            any = scheme.leader_score(scheme.key(i), r, st).score < q;
        if (!any) ++no_leader;
    }
    const double frac = static_cast<double>(no_leader) / static_cast<double>(rounds);
    const double analytic = std::pow(1.0 - q, n);
    const double sigma = std::sqrt(analytic * (1.0 - analytic) / static_cast<double>(rounds));
    out << "rounds             " << rounds << '\n'
        << "no-leader rounds   " << no_leader << '\n'
        << std::scientific << std::setprecision(6)  //
        << "empirical fraction " << frac << '\n'
        << "analytic (1-q)^N   " << analytic << '\n'
        << "binomial sigma     " << sigma << '\n';
    return 0;
}

}  // namespace gosig::driver
