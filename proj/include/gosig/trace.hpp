// Run traces: line-delimited JSON records, one protocol event per line, with
// a meta record first.  The byte stream is the determinism boundary — two
// runs agree iff their trace bytes agree — and the only input the offline
// monitors ever see, so every field a monitor needs must be on the record.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "gosig/hash.hpp"

namespace gosig::trace {

inline constexpr std::uint32_t schema_version = 1;

struct TraceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// First line of every trace.  `config_json` is the canonical scenario
// serialization; `manifest_json` is whatever the driver wants embedded for
// provenance (may be empty).
struct Meta {
    std::uint32_t version = schema_version;
    std::uint32_t n = 0;
    std::uint32_t f = 0;
    std::uint64_t seed = 0;
    std::vector<std::uint32_t> byzantine;
    std::string behavior;
    std::string config_json;
    std::string manifest_json;

    bool operator==(const Meta&) const = default;
};

// Emitted once per round, after sortition resolves.  `min_leader` is the
// lowest-scoring potential leader (omniscient view); absent on no-leader
// rounds.  `min_leader_faulty` says whether that player was Byzantine or
// under an adaptive attack when the round began.
struct Round {
    std::uint64_t round = 0;
    std::int64_t start_us = 0;
    std::uint32_t potential_leaders = 0;
    std::optional<std::uint32_t> min_leader;
    bool min_leader_faulty = false;

    bool operator==(const Round&) const = default;
};

struct Propose {
    std::uint64_t round = 0;
    std::uint32_t player = 0;
    std::uint64_t height = 0;
    Hash256 block{};
    double score = 0.0;
    std::int64_t time_us = 0;

    bool operator==(const Propose&) const = default;
};

// A player's single per-round prepare vote.
struct Vote {
    std::uint64_t round = 0;
    std::uint32_t player = 0;
    std::uint64_t height = 0;
    Hash256 block{};
    std::int64_t time_us = 0;

    bool operator==(const Vote&) const = default;
};

struct TcSign {
    std::uint64_t round = 0;
    std::uint32_t player = 0;
    std::uint64_t height = 0;
    Hash256 block{};
    std::int64_t time_us = 0;

    bool operator==(const TcSign&) const = default;
};

struct Commit {
    std::uint64_t round = 0;  // the committing player's round at commit time
    std::uint32_t player = 0;
    std::uint64_t height = 0;
    Hash256 block{};
    std::uint32_t proposer = 0;
    bool proposer_honest = true;
    std::int64_t time_us = 0;

    bool operator==(const Commit&) const = default;
};

// A tentative commit carried across a round boundary (pending block).
struct Carry {
    std::uint64_t round = 0;  // the round that just ended
    std::uint32_t player = 0;
    std::uint64_t height = 0;
    Hash256 block{};
    std::uint64_t freshness = 0;

    bool operator==(const Carry&) const = default;
};

struct Attack {
    std::vector<std::uint32_t> targets;
    std::int64_t issued_us = 0;
    std::int64_t effective_us = 0;  // issued + delta_t
    std::int64_t stop_us = 0;

    bool operator==(const Attack&) const = default;
};

// Per-round aggregate, emitted at round end.  Completion times are relative
// to the round's earliest local start and absent (not zero) when the round
// never completed the stage.
struct RoundMetrics {
    std::uint64_t round = 0;
    std::optional<std::int64_t> stage1_complete_us;
    std::optional<std::int64_t> stage2_complete_us;
    std::uint32_t commits = 0;

    bool operator==(const RoundMetrics&) const = default;
};

struct Bytes {
    std::uint32_t player = 0;
    std::uint64_t sent = 0;

    bool operator==(const Bytes&) const = default;
};

struct End {
    std::uint64_t rounds = 0;
    std::uint64_t final_height = 0;
    std::uint64_t total_commits = 0;

    bool operator==(const End&) const = default;
};

using Record = std::variant<Meta, Round, Propose, Vote, TcSign, Commit, Carry, Attack,
                            RoundMetrics, Bytes, End>;

// One JSON object, sorted keys, no newline.
std::string encode(const Record& r);
// Inverse of encode; throws TraceError on malformed lines or unknown kinds.
Record decode(const std::string& line);

// Streams records and maintains a chained digest
// h_0 = 0, h_{i+1} = sha256(h_i || line_i || '\n') so that trace equality can
// be checked without retaining the bytes.
class TraceWriter {
public:
    explicit TraceWriter(std::ostream* out = nullptr) : out_(out) {}

    void write(const Record& r);
    const Hash256& digest() const { return digest_; }
    std::uint64_t lines() const { return lines_; }

private:
    std::ostream* out_;
    Hash256 digest_{};
    std::uint64_t lines_ = 0;
};

// Pulls records out of a stored trace; errors carry the 1-based line number.
class TraceReader {
public:
    explicit TraceReader(std::istream& in) : in_(&in) {}

    std::optional<Record> next();
    std::uint64_t line() const { return line_; }

private:
    std::istream* in_;
    std::uint64_t line_ = 0;
};

}  // namespace gosig::trace
