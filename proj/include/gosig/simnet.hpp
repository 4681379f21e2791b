// Deterministic discrete-event network simulator.  One logical thread pops
// events off a (time, sequence) priority queue; every random draw comes from
// generators forked off the scenario seed, so a config maps to exactly one
// event timeline and one trace byte stream.
//
// Network model: per-link exponential latency, independent loss, per-player
// outbound bandwidth as a serialization queue, and a verification cost of
// a + b*k ms for k distinct signers charged before a message is handled.
// Stage I spreads proposals by stepped push gossip (fanout peers per step,
// bounded repeats per message); Stage II re-gossips each player's freshest
// aggregate to connection_limit peers every step until the stage ends.
// After the scenario's global stabilization time, honest-to-honest traffic
// is loss-free and delivered within the configured bound (partial synchrony).
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>

#include "gosig/scenario.hpp"
#include "gosig/trace.hpp"

namespace gosig::simnet {

// Peer backoff (gossip blacklist): a failed connection excludes the peer for
// one unit (typically half a round); each consecutive failure adds one more
// unit; any received message from the peer clears the slate.
class Backoff {
public:
    explicit Backoff(std::int64_t unit_us) : unit_us_(unit_us) {}

    bool blocked(std::uint32_t peer, std::int64_t now_us) const {
        auto it = entries_.find(peer);
        return it != entries_.end() && now_us < it->second.until_us;
    }
    std::int64_t blocked_until(std::uint32_t peer) const {
        auto it = entries_.find(peer);
        return it == entries_.end() ? 0 : it->second.until_us;
    }
    void record_failure(std::uint32_t peer, std::int64_t now_us) {
        auto& e = entries_[peer];
        e.strikes += 1;
        e.until_us = now_us + static_cast<std::int64_t>(e.strikes) * unit_us_;
    }
    void record_contact(std::uint32_t peer) { entries_.erase(peer); }

private:
    struct Entry {
        std::int64_t until_us = 0;
        std::uint32_t strikes = 0;
    };
    std::int64_t unit_us_;
    std::map<std::uint32_t, Entry> entries_;
};

using RecordSink = std::function<void(const trace::Record&)>;

struct RunOptions {
    std::string manifest_json;       // embedded verbatim in the meta record
    std::ostream* trace_out = nullptr;  // full trace stream, if wanted
    RecordSink sink;                 // online observers, called per record
};

struct RunResult {
    Hash256 trace_digest{};  // chained digest over the trace lines
    std::uint64_t trace_lines = 0;
    std::uint64_t total_commits = 0;
    std::uint64_t final_height = 0;  // highest honest committed height
    std::uint64_t rounds = 0;
};

// Runs the whole protocol under the scenario.  Throws scenario::ConfigError
// on an invalid config (including a blown fault budget).
RunResult run_scenario(const scenario::ScenarioConfig& cfg, const RunOptions& opts = {});

}  // namespace gosig::simnet
