#include "gosig/monitor.hpp"

#include <algorithm>

#include <json.hpp>

#include "gosig/scenario.hpp"
#include "gosig/sigagg.hpp"

namespace gosig::monitor {

using nlohmann::json;

namespace {

bool contains(const std::vector<std::uint32_t>& v, std::uint32_t x) {
    return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace

// --- commit view -----------------------------------------------------------

void CommitLedgerView::set_byzantine(const std::vector<std::uint32_t>& players) {
    byzantine_ = players;
}

void CommitLedgerView::ingest(const trace::Commit& c, std::uint64_t line) {
    const auto key = std::make_pair(c.player, c.height);
    auto it = index_.find(key);
    if (it != index_.end() && entries_[it->second].block == c.block)
        return;  // exact duplicate; one entry per (player, height)
    CommitEntry e;
    e.player = c.player;
    e.height = c.height;
    e.block = c.block;
    e.round = c.round;
    e.honest = !contains(byzantine_, c.player);
    e.proposer_honest = c.proposer_honest;
    e.line = line;
    if (it == index_.end()) index_.emplace(key, entries_.size());
    if (e.honest) ++honest_count_;
    entries_.push_back(e);
}

std::map<std::uint64_t, CommitEntry> CommitLedgerView::earliest_honest() const {
    std::map<std::uint64_t, CommitEntry> out;
    for (const auto& e : entries_) {
        if (!e.honest) continue;
        auto [it, fresh] = out.emplace(e.height, e);
        if (!fresh && e.round < it->second.round) it->second = e;
    }
    return out;
}

// --- tc event log ------------------------------------------------------------

void TcEventLog::set_byzantine(const std::vector<std::uint32_t>& players) {
    byzantine_ = players;
}

void TcEventLog::ingest(const trace::TcSign& t, std::uint64_t line) {
    TcEvent e;
    e.player = t.player;
    e.round = t.round;
    e.height = t.height;
    e.block = t.block;
    e.honest = !contains(byzantine_, t.player);
    e.line = line;
    events_.push_back(e);
}

// --- safety checks ------------------------------------------------------------

ForkReport check_no_fork(const CommitLedgerView& view) {
    std::map<std::uint64_t, const CommitEntry*> first;
    for (const auto& e : view.entries()) {
        if (!e.honest) continue;
        auto [it, fresh] = first.emplace(e.height, &e);
        if (fresh || it->second->block == e.block) continue;
        ForkViolation v;
        v.height = e.height;
        v.player_a = it->second->player;
        v.player_b = e.player;
        v.block_a = it->second->block;
        v.block_b = e.block;
        v.line_a = it->second->line;
        v.line_b = e.line;
        return {false, v};
    }
    return {};
}

TcAfterCommitReport check_lemma_no_tc(const CommitLedgerView& view, const TcEventLog& log) {
    const auto committed = view.earliest_honest();
    for (const auto& e : log.events()) {
        if (!e.honest) continue;
        // Any commit at height >= the event's height, in an earlier round,
        // makes this event illegal — unless it is the same block re-signed
        // at its own height.
        for (auto it = committed.lower_bound(e.height); it != committed.end(); ++it) {
            const CommitEntry& c = it->second;
            if (e.round <= c.round) continue;
            if (c.height == e.height && c.block == e.block) continue;
            TcAfterCommitViolation v;
            v.committer = c.player;
            v.commit_round = c.round;
            v.commit_height = c.height;
            v.committed_block = c.block;
            v.commit_line = c.line;
            v.signer = e.player;
            v.tc_round = e.round;
            v.tc_height = e.height;
            v.tc_block = e.block;
            v.tc_line = e.line;
            return {false, v};
        }
    }
    return {};
}

// --- liveness -----------------------------------------------------------------

const char* to_string(LivenessVerdict v) {
    switch (v) {
        case LivenessVerdict::ok: return "ok";
        case LivenessVerdict::stall: return "stall";
        case LivenessVerdict::inconclusive: return "inconclusive";
        case LivenessVerdict::not_applicable: return "not_applicable";
    }
    return "?";
}

LivenessReport check_liveness(const CommitLedgerView& view,
                              const std::vector<trace::Round>& rounds,
                              const LivenessConfig& cfg) {
    LivenessReport rep;
    rep.window = cfg.window;
    if (cfg.gst_us < 0) {
        rep.verdict = LivenessVerdict::not_applicable;
        rep.note = "scenario declares no stabilization time";
        return rep;
    }
    const trace::Round* start = nullptr;
    for (const auto& r : rounds)
        if (r.start_us >= cfg.gst_us) {
            start = &r;
            break;
        }
    if (!start) {
        rep.verdict = LivenessVerdict::inconclusive;
        rep.note = "trace ends before the stabilization time";
        return rep;
    }
    rep.window_start_round = start->round;
    const std::uint64_t lo = start->round;
    const std::uint64_t hi = lo + cfg.window;  // exclusive

    std::map<std::uint64_t, RoundOutcome> outcomes;
    std::uint64_t max_round_seen = 0;
    for (const auto& r : rounds) {
        max_round_seen = std::max(max_round_seen, r.round);
        if (r.round < lo || r.round >= hi) continue;
        RoundOutcome o;
        o.round = r.round;
        o.potential_leaders = r.potential_leaders;
        o.min_leader = r.min_leader;
        o.min_leader_faulty = r.min_leader_faulty;
        outcomes.emplace(r.round, o);
    }

    std::vector<bool> satisfied(cfg.n, false);
    for (const auto& e : view.entries()) {
        if (!e.honest || e.round < lo || e.round >= hi) continue;
        if (auto it = outcomes.find(e.round); it != outcomes.end()) ++it->second.honest_commits;
        if (e.proposer_honest && e.player < cfg.n) satisfied[e.player] = true;
    }
    for (std::uint32_t p = 0; p < cfg.n; ++p)
        if (!contains(cfg.byzantine, p) && !satisfied[p]) rep.stalled_players.push_back(p);
    for (const auto& [_, o] : outcomes) rep.outcomes.push_back(o);

    if (rep.stalled_players.empty()) {
        rep.verdict = LivenessVerdict::ok;
        return rep;
    }
    if (max_round_seen + 1 < hi) {
        rep.verdict = LivenessVerdict::inconclusive;
        rep.note = "trace ends before the liveness window closes";
        return rep;
    }
    const bool honest_leader = std::any_of(
        rep.outcomes.begin(), rep.outcomes.end(),
        [](const RoundOutcome& o) { return o.min_leader && !o.min_leader_faulty; });
    if (!honest_leader) {
        rep.verdict = LivenessVerdict::inconclusive;
        rep.note = "no honest minimum-score leader occurred in the window";
        return rep;
    }
    rep.verdict = LivenessVerdict::stall;
    return rep;
}

// --- metrics ------------------------------------------------------------------

void MetricsAccumulator::ingest(const trace::Record& rec) {
    std::visit(
        [this](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, trace::Meta>) {
                meta_ = v;
            } else if constexpr (std::is_same_v<T, trace::Round>) {
                ++rounds_;
                if (v.potential_leaders == 0) ++no_leader_rounds_;
            } else if constexpr (std::is_same_v<T, trace::Propose>) {
                first_proposed_.emplace(v.block, v.round);
            } else if constexpr (std::is_same_v<T, trace::Commit>) {
                if (contains(meta_.byzantine, v.player)) return;
                ++honest_commits_;
                auto it = first_proposed_.find(v.block);
                if (it == first_proposed_.end() || v.round < it->second) return;
                const std::uint64_t lat = v.round - it->second;
                latency_sum_ += static_cast<double>(lat);
                ++latency_count_;
                latency_max_ = std::max(latency_max_, lat);
            } else if constexpr (std::is_same_v<T, trace::RoundMetrics>) {
                per_round_.push_back(v);
            } else if constexpr (std::is_same_v<T, trace::Bytes>) {
                bytes_.push_back(v.sent);
            }
        },
        rec);
}

MetricsReport MetricsAccumulator::report() const {
    MetricsReport r;
    r.rounds = rounds_;
    r.no_leader_rounds = no_leader_rounds_;
    r.no_leader_fraction =
        rounds_ ? static_cast<double>(no_leader_rounds_) / static_cast<double>(rounds_) : 0.0;
    auto stage = [this](auto field) {
        StageStats s;
        std::int64_t sum = 0;
        std::int64_t mx = 0;
        for (const auto& m : per_round_) {
            const auto& v = m.*field;
            if (!v) continue;
            ++s.completed_rounds;
            sum += *v;
            mx = std::max(mx, *v);
        }
        if (s.completed_rounds) {
            s.mean_us = sum / static_cast<std::int64_t>(s.completed_rounds);
            s.max_us = mx;
        }
        return s;
    };
    r.stage1 = stage(&trace::RoundMetrics::stage1_complete_us);
    r.stage2 = stage(&trace::RoundMetrics::stage2_complete_us);
    r.honest_commits = honest_commits_;
    if (latency_count_) {
        r.mean_commit_latency_rounds = latency_sum_ / static_cast<double>(latency_count_);
        r.max_commit_latency_rounds = latency_max_;
    }
    if (!bytes_.empty()) {
        std::uint64_t total = 0;
        std::uint64_t mx = 0;
        for (auto b : bytes_) {
            total += b;
            mx = std::max(mx, b);
        }
        r.total_bytes_sent = total;
        r.max_bytes_sent = mx;
        r.mean_bytes_sent = total / bytes_.size();
    }
    if (meta_.n) r.max_multisig_bytes = sigagg::encoded_size(meta_.n, 2048, 32);
    r.per_round = per_round_;
    return r;
}

// --- aggregator ----------------------------------------------------------------

void Monitors::ingest(const trace::Record& rec) {
    ++line_;
    std::visit(
        [this](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, trace::Meta>) {
                meta_ = v;
                view_.set_byzantine(v.byzantine);
                log_.set_byzantine(v.byzantine);
                if (!v.config_json.empty()) {
                    try {
                        const auto cfg = scenario::parse_config(v.config_json);
                        if (cfg.gst_ms >= 0) gst_us_ = cfg.gst_ms * 1000;
                    } catch (const scenario::ConfigError&) {
                        // synthetic traces may carry no parsable config
                    }
                }
            } else if constexpr (std::is_same_v<T, trace::Round>) {
                rounds_.push_back(v);
            } else if constexpr (std::is_same_v<T, trace::Commit>) {
                view_.ingest(v, line_);
            } else if constexpr (std::is_same_v<T, trace::TcSign>) {
                log_.ingest(v, line_);
            }
        },
        rec);
    metrics_.ingest(rec);
}

LivenessReport Monitors::liveness() const {
    LivenessConfig cfg;
    cfg.window = window_;
    cfg.gst_us = gst_us_;
    cfg.n = meta_.n;
    cfg.byzantine = meta_.byzantine;
    return check_liveness(view_, rounds_, cfg);
}

// --- rendering -------------------------------------------------------------------

std::string to_json_line(const ForkReport& r) {
    json j{{"monitor", "no_fork"}, {"ok", r.ok}};
    if (r.violation) {
        const auto& v = *r.violation;
        j["violation"] = {{"height", v.height},       {"player_a", v.player_a},
                          {"player_b", v.player_b},   {"block_a", to_hex(v.block_a)},
                          {"block_b", to_hex(v.block_b)}, {"line_a", v.line_a},
                          {"line_b", v.line_b}};
    } else {
        j["violation"] = nullptr;
    }
    return j.dump();
}

std::string to_json_line(const TcAfterCommitReport& r) {
    json j{{"monitor", "tc_after_commit"}, {"ok", r.ok}};
    if (r.violation) {
        const auto& v = *r.violation;
        j["violation"] = {{"committer", v.committer},
                          {"commit_round", v.commit_round},
                          {"commit_height", v.commit_height},
                          {"committed_block", to_hex(v.committed_block)},
                          {"commit_line", v.commit_line},
                          {"signer", v.signer},
                          {"tc_round", v.tc_round},
                          {"tc_height", v.tc_height},
                          {"tc_block", to_hex(v.tc_block)},
                          {"tc_line", v.tc_line}};
    } else {
        j["violation"] = nullptr;
    }
    return j.dump();
}

std::string to_json_line(const LivenessReport& r) {
    json j{{"monitor", "liveness"},
           {"verdict", to_string(r.verdict)},
           {"window", r.window},
           {"window_start_round", r.window_start_round},
           {"stalled_players", r.stalled_players},
           {"note", r.note}};
    json rows = json::array();
    for (const auto& o : r.outcomes) {
        json row{{"round", o.round},
                 {"potential_leaders", o.potential_leaders},
                 {"min_leader_faulty", o.min_leader_faulty},
                 {"honest_commits", o.honest_commits}};
        if (o.min_leader)
            row["min_leader"] = *o.min_leader;
        else
            row["min_leader"] = nullptr;
        rows.push_back(row);
    }
    j["rounds"] = rows;
    return j.dump();
}

std::string to_json_line(const MetricsReport& r) {
    auto stage = [](const StageStats& s) {
        json j{{"completed_rounds", s.completed_rounds}};
        j["mean_us"] = s.mean_us ? json(*s.mean_us) : json(nullptr);
        j["max_us"] = s.max_us ? json(*s.max_us) : json(nullptr);
        return j;
    };
    json j{{"monitor", "metrics"},
           {"rounds", r.rounds},
           {"no_leader_rounds", r.no_leader_rounds},
           {"no_leader_fraction", r.no_leader_fraction},
           {"stage1", stage(r.stage1)},
           {"stage2", stage(r.stage2)},
           {"honest_commits", r.honest_commits},
           {"max_commit_latency_rounds", r.max_commit_latency_rounds},
           {"max_bytes_sent", r.max_bytes_sent},
           {"total_bytes_sent", r.total_bytes_sent},
           {"max_multisig_bytes", r.max_multisig_bytes}};
    j["mean_commit_latency_rounds"] =
        r.mean_commit_latency_rounds ? json(*r.mean_commit_latency_rounds) : json(nullptr);
    j["mean_bytes_sent"] = r.mean_bytes_sent ? json(*r.mean_bytes_sent) : json(nullptr);
    json rows = json::array();
    for (const auto& m : r.per_round) {
        json row{{"round", m.round}, {"commits", m.commits}};
        row["stage1_us"] = m.stage1_complete_us ? json(*m.stage1_complete_us) : json(nullptr);
        row["stage2_us"] = m.stage2_complete_us ? json(*m.stage2_complete_us) : json(nullptr);
        rows.push_back(row);
    }
    j["per_round"] = rows;
    return j.dump();
}

}  // namespace gosig::monitor
