// Scenario configuration: everything a simulation run depends on, in one
// value type.  Files are JSON; parsing is strict — an unknown key anywhere in
// the tree is an error, so a typo cannot silently fall back to a default.
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gosig::scenario {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ByzantineBehavior : std::uint8_t {
    silent,          // never proposes, never votes
    equivocate,      // proposes two different blocks when leader
    overflow_attacker,  // inflates multi-signature counters toward 2^B - 1
    arbitrary_relay, // re-gossips stale/foreign aggregates instead of merging
};

ByzantineBehavior behavior_from_string(const std::string& s);
const char* to_string(ByzantineBehavior b);

// One adaptive-attack window: the listed players act crashed from
// start_ms + delta_t until stop_ms.
struct AttackWindow {
    std::vector<std::uint32_t> targets;
    std::int64_t start_ms = 0;
    std::int64_t stop_ms = 0;
};

enum class AdaptivePolicy : std::uint8_t {
    none,           // no adaptive adversary
    explicit_list,  // follow `windows`
    chase_leaders,  // each round, retarget the previous round's proposers
};

struct ScenarioConfig {
    std::uint32_t n_players = 4;

    std::uint32_t byzantine_count = 0;
    ByzantineBehavior byzantine_behavior = ByzantineBehavior::silent;

    std::uint32_t adaptive_count = 0;
    AdaptivePolicy adaptive_policy = AdaptivePolicy::none;
    std::vector<AttackWindow> attack_windows;

    std::int64_t t1_ms = 25000;
    std::int64_t t2_ms = 5000;
    std::int64_t clock_skew_ms = 0;  // offsets drawn from [-skew/2, skew/2]

    std::uint32_t q_numerator = 7;  // q = min(q_numerator / N, 1)
    std::uint32_t fanout = 8;
    std::uint32_t connection_limit = 5;

    double latency_mean_ms = 300.0;
    double loss_rate = 0.01;
    double bandwidth_bps = 500'000.0;  // outbound bytes per simulated second
    double verify_a_ms = 11.0;
    double verify_b_ms = 0.11;

    // Partial synchrony: before gst_ms the configured latency/loss apply
    // unchanged; afterwards honest-to-honest deliveries are bounded by
    // delta_t_ms and never lost.  -1 means the network never stabilizes.
    // delta_t_ms is also the adaptive-attack activation delay.
    std::int64_t gst_ms = -1;
    std::int64_t delta_t_ms = 5000;

    double workload_tps = 0.0;
    std::uint32_t txn_bytes = 250;
    std::uint32_t max_block_txns = 1u << 14;

    std::uint64_t seed = 1;
    std::uint64_t rounds = 10;

    std::uint32_t f() const { return (n_players - 1) / 3; }
    double q_threshold() const;
    std::int64_t round_ms() const { return t1_ms + t2_ms; }

    // First Byzantine ordinal; statics occupy the tail [n - b, n) so that
    // player 0 is always honest.
    std::uint32_t first_byzantine() const { return n_players - byzantine_count; }
    bool is_byzantine(std::uint32_t player) const { return player >= first_byzantine(); }

    // Throws ConfigError on any inconsistency (fault budget, ranges).
    void validate() const;
};

// Strict parse: rejects unknown keys, wrong value types, and any config that
// fails validate().  `text` is a JSON document.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);

// Canonical re-serialisation (sorted keys) for embedding into run manifests.
std::string to_json(const ScenarioConfig& cfg);

}  // namespace gosig::scenario
