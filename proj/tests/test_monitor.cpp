#include <doctest.h>

#include <sstream>
#include <vector>

#include "gosig/monitor.hpp"
#include "gosig/scenario.hpp"
#include "gosig/simnet.hpp"
#include "gosig/trace.hpp"

using namespace gosig;
using namespace gosig::monitor;

namespace {

Hash256 mark(std::uint8_t b) {
    Hash256 h{};
    h[0] = b;
    return h;
}

trace::Commit commit(std::uint32_t player, std::uint64_t height, Hash256 block,
                     std::uint64_t round, bool proposer_honest = true) {
    trace::Commit c;
    c.round = round;
    c.player = player;
    c.height = height;
    c.block = block;
    c.proposer_honest = proposer_honest;
    return c;
}

trace::TcSign tc(std::uint32_t player, std::uint64_t height, Hash256 block,
                 std::uint64_t round) {
    trace::TcSign t;
    t.round = round;
    t.player = player;
    t.height = height;
    t.block = block;
    return t;
}

trace::Round round_rec(std::uint64_t round, std::int64_t start_us,
                       std::optional<std::uint32_t> min_leader, bool faulty = false) {
    trace::Round r;
    r.round = round;
    r.start_us = start_us;
    r.potential_leaders = min_leader ? 1 : 0;
    r.min_leader = min_leader;
    r.min_leader_faulty = faulty;
    return r;
}

// Meta whose embedded config carries the stabilization time monitors need.
trace::Meta meta_with_gst(std::uint32_t n, std::vector<std::uint32_t> byz,
                          std::int64_t gst_ms) {
    scenario::ScenarioConfig cfg;
    cfg.n_players = n;
    cfg.byzantine_count = static_cast<std::uint32_t>(byz.size());
    cfg.gst_ms = gst_ms;
    trace::Meta m;
    m.n = n;
    m.f = cfg.f();
    m.byzantine = std::move(byz);
    m.config_json = scenario::to_json(cfg);
    return m;
}

}  // namespace

TEST_CASE("commit ledger view bookkeeping") {
    CommitLedgerView view;
    view.set_byzantine({3});
    view.ingest(commit(0, 1, mark(1), 2), 10);
    view.ingest(commit(0, 1, mark(1), 2), 11);  // exact duplicate
    view.ingest(commit(1, 1, mark(1), 3), 12);
    view.ingest(commit(3, 1, mark(9), 3), 13);  // byzantine
    REQUIRE(view.entries().size() == 3);
    CHECK(view.honest_count() == 2);
    CHECK(view.entries()[0].line == 10);
    CHECK_FALSE(view.entries()[2].honest);

    auto earliest = view.earliest_honest();
    REQUIRE(earliest.count(1) == 1);
    CHECK(earliest.at(1).player == 0);
    CHECK(earliest.at(1).round == 2);
}

TEST_CASE("fork detector") {
    CommitLedgerView view;
    view.set_byzantine({3});

    SUBCASE("agreement is clean") {
        view.ingest(commit(0, 1, mark(1), 2), 1);
        view.ingest(commit(1, 1, mark(1), 2), 2);
        view.ingest(commit(0, 2, mark(2), 3), 3);
        CHECK(check_no_fork(view).ok);
    }

    SUBCASE("honest divergence is flagged with both sides") {
        view.ingest(commit(0, 1, mark(1), 2), 5);
        view.ingest(commit(1, 1, mark(1), 2), 6);
        view.ingest(commit(2, 1, mark(7), 4), 7);
        auto rep = check_no_fork(view);
        REQUIRE_FALSE(rep.ok);
        REQUIRE(rep.violation.has_value());
        CHECK(rep.violation->height == 1);
        CHECK(rep.violation->player_a == 0);
        CHECK(rep.violation->player_b == 2);
        CHECK(rep.violation->block_a == mark(1));
        CHECK(rep.violation->block_b == mark(7));
        CHECK(rep.violation->line_a == 5);
        CHECK(rep.violation->line_b == 7);
    }

    SUBCASE("byzantine commits do not count as forks") {
        view.ingest(commit(0, 1, mark(1), 2), 1);
        view.ingest(commit(3, 1, mark(7), 2), 2);
        CHECK(check_no_fork(view).ok);
    }
}

TEST_CASE("tc-after-commit detector") {
    CommitLedgerView view;
    view.set_byzantine({3});
    TcEventLog log;
    log.set_byzantine({3});
    view.ingest(commit(0, 2, mark(2), 4), 1);

    SUBCASE("re-signing the committed block is benign") {
        log.ingest(tc(1, 2, mark(2), 6), 2);
        CHECK(check_lemma_no_tc(view, log).ok);
    }

    SUBCASE("a different block at or before the same round is benign") {
        log.ingest(tc(1, 2, mark(8), 4), 2);
        log.ingest(tc(1, 2, mark(8), 3), 3);
        CHECK(check_lemma_no_tc(view, log).ok);
    }

    SUBCASE("a different block in a later round is flagged") {
        log.ingest(tc(1, 2, mark(8), 6), 2);
        auto rep = check_lemma_no_tc(view, log);
        REQUIRE_FALSE(rep.ok);
        REQUIRE(rep.violation.has_value());
        CHECK(rep.violation->committer == 0);
        CHECK(rep.violation->commit_round == 4);
        CHECK(rep.violation->commit_height == 2);
        CHECK(rep.violation->signer == 1);
        CHECK(rep.violation->tc_round == 6);
        CHECK(rep.violation->tc_block == mark(8));
        CHECK(rep.violation->commit_line == 1);
        CHECK(rep.violation->tc_line == 2);
    }

    SUBCASE("signing below the committed frontier in a later round is flagged") {
        log.ingest(tc(1, 1, mark(5), 6), 2);
        CHECK_FALSE(check_lemma_no_tc(view, log).ok);
    }

    SUBCASE("byzantine signers are out of scope") {
        log.ingest(tc(3, 2, mark(8), 6), 2);
        CHECK(check_lemma_no_tc(view, log).ok);
    }
}

TEST_CASE("liveness verdicts") {
    const std::uint64_t W = 3;

    SUBCASE("no stabilization time declared") {
        Monitors mon(W);
        trace::Meta m;
        m.n = 4;
        mon.ingest(m);
        CHECK(mon.liveness().verdict == LivenessVerdict::not_applicable);
    }

    SUBCASE("every honest player commits in the window") {
        Monitors mon(W);
        mon.ingest(meta_with_gst(4, {3}, 0));
        mon.ingest(round_rec(1, 0, 0));
        for (std::uint32_t p = 0; p < 3; ++p) mon.ingest(commit(p, 1, mark(1), 1));
        auto rep = mon.liveness();
        CHECK(rep.verdict == LivenessVerdict::ok);
        CHECK(rep.window_start_round == 1);
        REQUIRE(rep.outcomes.size() == 1);
        CHECK(rep.outcomes[0].honest_commits == 3);
    }

    SUBCASE("commits before stabilization do not satisfy the claim") {
        Monitors mon(W);
        mon.ingest(meta_with_gst(4, {}, 10));  // stabilizes at 10ms
        mon.ingest(round_rec(1, 0, 0));        // pre-stabilization round
        for (std::uint32_t p = 0; p < 4; ++p) mon.ingest(commit(p, 1, mark(1), 1));
        for (std::uint64_t r = 2; r <= 4; ++r) mon.ingest(round_rec(r, 10'000 * r, 0));
        CHECK(mon.liveness().verdict == LivenessVerdict::stall);
    }

    SUBCASE("stall names the players and per-round outcomes") {
        Monitors mon(W);
        mon.ingest(meta_with_gst(4, {3}, 0));
        for (std::uint64_t r = 1; r <= 3; ++r) mon.ingest(round_rec(r, 1000 * r, 0));
        mon.ingest(commit(0, 1, mark(1), 1));
        auto rep = mon.liveness();
        REQUIRE(rep.verdict == LivenessVerdict::stall);
        CHECK(rep.stalled_players == std::vector<std::uint32_t>{1, 2});
        CHECK(rep.outcomes.size() == 3);
        CHECK(rep.outcomes[0].honest_commits == 1);
    }

    SUBCASE("no honest minimum-score leader means inconclusive, not failed") {
        Monitors mon(W);
        mon.ingest(meta_with_gst(4, {3}, 0));
        mon.ingest(round_rec(1, 1000, 3, true));
        mon.ingest(round_rec(2, 2000, std::nullopt));
        mon.ingest(round_rec(3, 3000, 3, true));
        auto rep = mon.liveness();
        CHECK(rep.verdict == LivenessVerdict::inconclusive);
        CHECK(rep.note == "no honest minimum-score leader occurred in the window");
    }

    SUBCASE("a trace that ends mid-window is inconclusive") {
        Monitors mon(W);
        mon.ingest(meta_with_gst(4, {}, 0));
        mon.ingest(round_rec(1, 1000, 0));
        CHECK(mon.liveness().verdict == LivenessVerdict::inconclusive);
    }
}

TEST_CASE("metrics report") {
    MetricsAccumulator acc;
    trace::Meta m;
    m.n = 1000;
    m.byzantine = {999};
    acc.ingest(m);

    SUBCASE("stage times are absent, not zero, when nothing completed") {
        trace::RoundMetrics rm;
        rm.round = 1;
        acc.ingest(rm);
        auto rep = acc.report();
        CHECK(rep.stage1.completed_rounds == 0);
        CHECK_FALSE(rep.stage1.mean_us.has_value());
        CHECK_FALSE(rep.stage2.max_us.has_value());
    }

    SUBCASE("per-round aggregates and leader gaps") {
        acc.ingest(round_rec(1, 0, 0));
        acc.ingest(round_rec(2, 1000, std::nullopt));
        acc.ingest(round_rec(3, 2000, 0));
        acc.ingest(round_rec(4, 3000, 0));
        trace::RoundMetrics rm;
        rm.round = 1;
        rm.stage1_complete_us = 100;
        rm.stage2_complete_us = 300;
        acc.ingest(rm);
        rm.round = 3;
        rm.stage1_complete_us = 300;
        rm.stage2_complete_us = std::nullopt;
        acc.ingest(rm);
        auto rep = acc.report();
        CHECK(rep.rounds == 4);
        CHECK(rep.no_leader_rounds == 1);
        CHECK(rep.no_leader_fraction == doctest::Approx(0.25));
        CHECK(rep.stage1.completed_rounds == 2);
        CHECK(rep.stage1.mean_us == 200);
        CHECK(rep.stage1.max_us == 300);
        CHECK(rep.stage2.completed_rounds == 1);
        CHECK(rep.per_round.size() == 2);
    }

    SUBCASE("commit latency is measured in rounds from first proposal") {
        trace::Propose p;
        p.round = 3;
        p.block = mark(1);
        acc.ingest(p);
        acc.ingest(commit(0, 1, mark(1), 5));
        acc.ingest(commit(1, 1, mark(1), 3));
        acc.ingest(commit(999, 1, mark(1), 9));  // byzantine, excluded
        acc.ingest(commit(2, 2, mark(2), 4));    // never proposed in trace
        auto rep = acc.report();
        CHECK(rep.honest_commits == 3);
        CHECK(rep.mean_commit_latency_rounds == doctest::Approx(1.0));
        CHECK(rep.max_commit_latency_rounds == 2);
    }

    SUBCASE("byte totals and the committee-wide signature footprint") {
        trace::Bytes b;
        b.player = 0;
        b.sent = 100;
        acc.ingest(b);
        b.player = 1;
        b.sent = 300;
        acc.ingest(b);
        auto rep = acc.report();
        CHECK(rep.total_bytes_sent == 400);
        CHECK(rep.max_bytes_sent == 300);
        CHECK(rep.mean_bytes_sent == 200);
        CHECK(rep.max_multisig_bytes == 4256);
    }
}

TEST_CASE("verdict rendering") {
    CommitLedgerView view;
    view.ingest(commit(0, 1, mark(1), 2), 1);
    view.ingest(commit(1, 1, mark(2), 2), 2);
    auto line = to_json_line(check_no_fork(view));
    CHECK(line.find("\"monitor\":\"no_fork\"") != std::string::npos);
    CHECK(line.find("\"ok\":false") != std::string::npos);
    CHECK(line.find("\"height\":1") != std::string::npos);
    CHECK(line.find('\n') == std::string::npos);
}

TEST_CASE("monitors are pure over the stored trace") {
    scenario::ScenarioConfig cfg;
    cfg.n_players = 4;
    cfg.t1_ms = 1500;
    cfg.t2_ms = 1500;
    cfg.rounds = 6;
    cfg.gst_ms = 0;
    cfg.seed = 77;

    Monitors online;
    std::ostringstream trace_bytes;
    simnet::RunOptions opts;
    opts.trace_out = &trace_bytes;
    opts.sink = [&](const trace::Record& r) { online.ingest(r); };
    auto res = simnet::run_scenario(cfg, opts);
    REQUIRE(res.total_commits > 0);

    Monitors replayed;
    std::istringstream in(trace_bytes.str());
    trace::TraceReader reader(in);
    while (auto rec = reader.next()) replayed.ingest(*rec);

    CHECK(online.lines() == replayed.lines());
    CHECK(to_json_line(online.no_fork()) == to_json_line(replayed.no_fork()));
    CHECK(to_json_line(online.tc_after_commit()) == to_json_line(replayed.tc_after_commit()));
    CHECK(to_json_line(online.liveness()) == to_json_line(replayed.liveness()));
    CHECK(to_json_line(online.metrics()) == to_json_line(replayed.metrics()));

    CHECK(online.safety_ok());
    CHECK(online.liveness().verdict == LivenessVerdict::ok);
    auto met = online.metrics();
    CHECK(met.rounds == 6);
    CHECK(met.honest_commits == res.total_commits);
    CHECK(met.stage2.completed_rounds > 0);
}
