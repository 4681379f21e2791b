// Safety and liveness monitors.  Monitors are pure functions of the trace
// record sequence: feeding the same records in the same order always yields
// the same verdicts, online or from a stored file.  They never touch live
// simulation state.
//
// Scope is honest players only: commits and signing events from players the
// meta record lists as Byzantine are recorded but excluded from every
// verdict, since a faulty player's log proves nothing either way.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gosig/hash.hpp"
#include "gosig/trace.hpp"

namespace gosig::monitor {

// --- commit view -----------------------------------------------------------

// One committed (player, height) pair.  `line` is the 1-based trace line of
// the commit record, so violation reports can point back into the file.
struct CommitEntry {
    std::uint32_t player = 0;
    std::uint64_t height = 0;
    Hash256 block{};
    std::uint64_t round = 0;
    bool honest = true;
    bool proposer_honest = true;
    std::uint64_t line = 0;
};

// Append-only ledger of every commit seen so far, at most one entry per
// (player, height).  Chronological order is preserved: "first divergence"
// in a fork report means first in trace order.
class CommitLedgerView {
public:
    void set_byzantine(const std::vector<std::uint32_t>& players);
    void ingest(const trace::Commit& c, std::uint64_t line);

    const std::vector<CommitEntry>& entries() const { return entries_; }
    // Earliest honest commit per height, by round then trace order.
    std::map<std::uint64_t, CommitEntry> earliest_honest() const;
    std::uint64_t honest_count() const { return honest_count_; }

private:
    std::vector<CommitEntry> entries_;
    std::vector<std::uint32_t> byzantine_;
    std::map<std::pair<std::uint32_t, std::uint64_t>, std::size_t> index_;
    std::uint64_t honest_count_ = 0;
};

// --- tentative-commit event log --------------------------------------------

struct TcEvent {
    std::uint32_t player = 0;
    std::uint64_t round = 0;
    std::uint64_t height = 0;
    Hash256 block{};
    bool honest = true;
    std::uint64_t line = 0;
};

// Time-ordered log of every tentative-commit signing event.
class TcEventLog {
public:
    void set_byzantine(const std::vector<std::uint32_t>& players);
    void ingest(const trace::TcSign& t, std::uint64_t line);

    const std::vector<TcEvent>& events() const { return events_; }

private:
    std::vector<TcEvent> events_;
    std::vector<std::uint32_t> byzantine_;
};

// --- safety checks ----------------------------------------------------------

// Two honest players committed different blocks at the same height.  The
// `a` side is the first commit at that height in trace order, `b` the first
// one that disagreed with it.
struct ForkViolation {
    std::uint64_t height = 0;
    std::uint32_t player_a = 0;
    std::uint32_t player_b = 0;
    Hash256 block_a{};
    Hash256 block_b{};
    std::uint64_t line_a = 0;
    std::uint64_t line_b = 0;
};

struct ForkReport {
    bool ok = true;
    std::optional<ForkViolation> violation;
};

// ok iff for every height, all honest commits agree on the block hash.
ForkReport check_no_fork(const CommitLedgerView& view);

// After an honest player commits a block at height h in round r, any honest
// tentative-commit signature in a later round for a different block at a
// height <= h contradicts the protocol's safety argument (the signer's
// pending block can never again fall behind the committed one).
struct TcAfterCommitViolation {
    // The commit that should have frozen history up to its height.
    std::uint32_t committer = 0;
    std::uint64_t commit_round = 0;
    std::uint64_t commit_height = 0;
    Hash256 committed_block{};
    std::uint64_t commit_line = 0;
    // The offending later signing event.
    std::uint32_t signer = 0;
    std::uint64_t tc_round = 0;
    std::uint64_t tc_height = 0;
    Hash256 tc_block{};
    std::uint64_t tc_line = 0;
};

struct TcAfterCommitReport {
    bool ok = true;
    std::optional<TcAfterCommitViolation> violation;
};

TcAfterCommitReport check_lemma_no_tc(const CommitLedgerView& view, const TcEventLog& log);

// --- liveness ---------------------------------------------------------------

enum class LivenessVerdict : std::uint8_t {
    ok,             // every honest player committed an honest block in the window
    stall,          // some player did not, despite an honest minimum-score leader
    inconclusive,   // timed out, but no round in the window had an honest
                    // minimum-score leader (or the trace ended early), so the
                    // protocol was never given the chance the claim assumes
    not_applicable, // scenario declares no stabilization time
};

const char* to_string(LivenessVerdict v);

struct LivenessConfig {
    std::uint64_t window = 10;   // rounds after stabilization to wait
    std::int64_t gst_us = -1;    // global stabilization time; -1 = never
    std::uint32_t n = 0;
    std::vector<std::uint32_t> byzantine;
};

struct RoundOutcome {
    std::uint64_t round = 0;
    std::uint32_t potential_leaders = 0;
    std::optional<std::uint32_t> min_leader;
    bool min_leader_faulty = false;
    std::uint32_t honest_commits = 0;
};

struct LivenessReport {
    LivenessVerdict verdict = LivenessVerdict::not_applicable;
    std::uint64_t window = 0;
    std::uint64_t window_start_round = 0;  // meaningful unless not_applicable
    std::vector<std::uint32_t> stalled_players;
    std::vector<RoundOutcome> outcomes;  // per-round leader/commit outcomes
    std::string note;
};

// ok iff within `window` rounds after stabilization every honest player
// commits at least one block proposed by an honest player.
LivenessReport check_liveness(const CommitLedgerView& view,
                              const std::vector<trace::Round>& rounds,
                              const LivenessConfig& cfg);

// --- metrics ----------------------------------------------------------------

struct StageStats {
    std::uint64_t completed_rounds = 0;     // rounds where the stage finished
    std::optional<std::int64_t> mean_us;    // absent when nothing completed
    std::optional<std::int64_t> max_us;
};

struct MetricsReport {
    std::uint64_t rounds = 0;
    std::uint64_t no_leader_rounds = 0;
    double no_leader_fraction = 0.0;
    StageStats stage1;
    StageStats stage2;
    std::uint64_t honest_commits = 0;
    std::optional<double> mean_commit_latency_rounds;
    std::uint64_t max_commit_latency_rounds = 0;
    std::optional<std::uint64_t> mean_bytes_sent;  // per player, from byte records
    std::uint64_t max_bytes_sent = 0;
    std::uint64_t total_bytes_sent = 0;
    std::size_t max_multisig_bytes = 0;  // committee-wide aggregate footprint
    std::vector<trace::RoundMetrics> per_round;
};

// Accumulates metrics record by record; report() is pure over what was fed.
class MetricsAccumulator {
public:
    void ingest(const trace::Record& rec);
    MetricsReport report() const;

private:
    trace::Meta meta_;
    std::vector<trace::RoundMetrics> per_round_;
    std::uint64_t rounds_ = 0;
    std::uint64_t no_leader_rounds_ = 0;
    std::map<Hash256, std::uint64_t> first_proposed_;  // block -> round
    std::uint64_t honest_commits_ = 0;
    double latency_sum_ = 0.0;
    std::uint64_t latency_count_ = 0;
    std::uint64_t latency_max_ = 0;
    std::vector<std::uint64_t> bytes_;
};

// --- aggregator --------------------------------------------------------------

// Feeds one record stream to every monitor.  Line numbers are assigned in
// ingestion order starting at 1, matching a stored trace's line numbers.
class Monitors {
public:
    explicit Monitors(std::uint64_t liveness_window = 10) : window_(liveness_window) {}

    void ingest(const trace::Record& rec);

    ForkReport no_fork() const { return check_no_fork(view_); }
    TcAfterCommitReport tc_after_commit() const { return check_lemma_no_tc(view_, log_); }
    LivenessReport liveness() const;
    MetricsReport metrics() const { return metrics_.report(); }
    bool safety_ok() const { return no_fork().ok && tc_after_commit().ok; }

    const trace::Meta& meta() const { return meta_; }
    const CommitLedgerView& view() const { return view_; }
    const TcEventLog& log() const { return log_; }
    std::uint64_t lines() const { return line_; }

private:
    std::uint64_t window_;
    std::uint64_t line_ = 0;
    trace::Meta meta_;
    std::int64_t gst_us_ = -1;
    CommitLedgerView view_;
    TcEventLog log_;
    std::vector<trace::Round> rounds_;
    MetricsAccumulator metrics_;
};

// --- rendering ---------------------------------------------------------------

// One JSON object per verdict, sorted keys, no newline; same conventions as
// trace records so the two streams can be interleaved.
std::string to_json_line(const ForkReport& r);
std::string to_json_line(const TcAfterCommitReport& r);
std::string to_json_line(const LivenessReport& r);
std::string to_json_line(const MetricsReport& r);

}  // namespace gosig::monitor
