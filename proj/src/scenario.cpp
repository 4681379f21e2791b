#include "gosig/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gosig::scenario {

using nlohmann::json;

ByzantineBehavior behavior_from_string(const std::string& s) {
    if (s == "silent") return ByzantineBehavior::silent;
    if (s == "equivocate") return ByzantineBehavior::equivocate;
    if (s == "overflow_attacker") return ByzantineBehavior::overflow_attacker;
    if (s == "arbitrary_relay") return ByzantineBehavior::arbitrary_relay;
    throw ConfigError("unknown byzantine behavior: " + s);
}

const char* to_string(ByzantineBehavior b) {
    switch (b) {
        case ByzantineBehavior::silent: return "silent";
        case ByzantineBehavior::equivocate: return "equivocate";
        case ByzantineBehavior::overflow_attacker: return "overflow_attacker";
        case ByzantineBehavior::arbitrary_relay: return "arbitrary_relay";
    }
    return "?";
}

double ScenarioConfig::q_threshold() const {
    double q = static_cast<double>(q_numerator) / static_cast<double>(n_players);
    return q > 1.0 ? 1.0 : q;
}

void ScenarioConfig::validate() const {
    if (n_players == 0) throw ConfigError("n_players must be positive");
    if (rounds == 0) throw ConfigError("rounds must be positive");
    if (byzantine_count + adaptive_count > f())
        throw ConfigError("fault budget exceeded: b + c > floor((N-1)/3)");
    if (t1_ms <= 0 || t2_ms <= 0) throw ConfigError("stage durations must be positive");
    if (clock_skew_ms < 0) throw ConfigError("clock_skew_ms must be non-negative");
    if (clock_skew_ms >= t2_ms)
        throw ConfigError("clock_skew_ms must stay below the Stage II duration");
    if (q_numerator == 0) throw ConfigError("q_numerator must be positive");
    if (fanout == 0) throw ConfigError("fanout must be positive");
    if (connection_limit == 0) throw ConfigError("connection_limit must be positive");
    if (latency_mean_ms <= 0) throw ConfigError("latency_mean_ms must be positive");
    if (loss_rate < 0.0 || loss_rate >= 1.0) throw ConfigError("loss_rate must be in [0, 1)");
    if (bandwidth_bps <= 0) throw ConfigError("bandwidth_Bps must be positive");
    if (verify_a_ms < 0 || verify_b_ms < 0) throw ConfigError("verify costs must be non-negative");
    if (gst_ms < -1) throw ConfigError("gst_ms must be >= 0, or -1 for never");
    if (delta_t_ms <= 0) throw ConfigError("delta_t_ms must be positive");
    if (workload_tps < 0) throw ConfigError("workload tps must be non-negative");
    if (txn_bytes == 0) throw ConfigError("txn_bytes must be positive");
    if (max_block_txns == 0) throw ConfigError("max_block_txns must be positive");
    if (adaptive_policy == AdaptivePolicy::explicit_list) {
        for (const auto& w : attack_windows) {
            if (w.targets.size() > adaptive_count)
                throw ConfigError("attack window targets more than adaptive.count players");
            if (w.stop_ms < w.start_ms) throw ConfigError("attack window stops before it starts");
            for (auto t : w.targets)
                if (t >= n_players) throw ConfigError("attack window targets unknown player");
        }
    } else if (!attack_windows.empty()) {
        throw ConfigError("explicit attack windows require schedule = list form");
    }
    if (adaptive_policy != AdaptivePolicy::none && adaptive_count == 0)
        throw ConfigError("adaptive schedule set but adaptive.count is zero");
}

namespace {

// Rejects keys that the extraction lambdas never touched.
class StrictObject {
public:
    StrictObject(const json& node, std::string where) : node_(node), where_(std::move(where)) {
        if (!node_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    bool has(const std::string& key) {
        seen_.push_back(key);
        return node_.contains(key);
    }

    const json& at(const std::string& key) { return node_.at(key); }

    template <typename T>
    void get(const std::string& key, T& out) {
        if (!has(key)) return;
        try {
            out = node_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where_ + "." + key + ": wrong value type");
        }
    }

    void finish() const {
        for (const auto& [key, value] : node_.items()) {
            (void)value;
            if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
                throw ConfigError(where_ + "." + key + ": unknown key");
        }
    }

private:
    const json& node_;
    std::string where_;
    std::vector<std::string> seen_;
};

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
    }

    ScenarioConfig cfg;
    StrictObject root(doc, "scenario");
    root.get("n_players", cfg.n_players);

    if (root.has("byzantine")) {
        StrictObject byz(root.at("byzantine"), "byzantine");
        byz.get("count", cfg.byzantine_count);
        if (byz.has("behavior"))
            cfg.byzantine_behavior = behavior_from_string(byz.at("behavior").get<std::string>());
        byz.finish();
    }

    if (root.has("adaptive")) {
        StrictObject ad(root.at("adaptive"), "adaptive");
        ad.get("count", cfg.adaptive_count);
        if (ad.has("schedule")) {
            const json& sched = ad.at("schedule");
            if (sched.is_string()) {
                auto s = sched.get<std::string>();
                if (s == "none")
                    cfg.adaptive_policy = AdaptivePolicy::none;
                else if (s == "chase_leaders")
                    cfg.adaptive_policy = AdaptivePolicy::chase_leaders;
                else
                    throw ConfigError("adaptive.schedule: unknown policy " + s);
            } else if (sched.is_array()) {
                cfg.adaptive_policy = AdaptivePolicy::explicit_list;
                for (std::size_t i = 0; i < sched.size(); ++i) {
                    StrictObject win(sched[i],
                                     "adaptive.schedule[" + std::to_string(i) + "]");
                    AttackWindow w;
                    win.get("targets", w.targets);
                    win.get("start_ms", w.start_ms);
                    win.get("stop_ms", w.stop_ms);
                    win.finish();
                    cfg.attack_windows.push_back(std::move(w));
                }
            } else {
                throw ConfigError("adaptive.schedule: expected policy name or window list");
            }
        }
        ad.finish();
    }

    if (root.has("round")) {
        StrictObject rnd(root.at("round"), "round");
        rnd.get("T1_ms", cfg.t1_ms);
        rnd.get("T2_ms", cfg.t2_ms);
        rnd.finish();
    }
    root.get("clock_skew_ms", cfg.clock_skew_ms);
    root.get("q_numerator", cfg.q_numerator);
    root.get("fanout", cfg.fanout);
    root.get("connection_limit", cfg.connection_limit);

    if (root.has("net")) {
        StrictObject net(root.at("net"), "net");
        net.get("latency_mean_ms", cfg.latency_mean_ms);
        net.get("loss_rate", cfg.loss_rate);
        net.get("bandwidth_Bps", cfg.bandwidth_bps);
        net.get("verify_a_ms", cfg.verify_a_ms);
        net.get("verify_b_ms", cfg.verify_b_ms);
        net.finish();
    }

    if (root.has("sync")) {
        StrictObject sync(root.at("sync"), "sync");
        sync.get("gst_ms", cfg.gst_ms);
        sync.get("delta_t_ms", cfg.delta_t_ms);
        sync.finish();
    }

    if (root.has("workload")) {
        StrictObject wl(root.at("workload"), "workload");
        wl.get("tps", cfg.workload_tps);
        wl.get("txn_bytes", cfg.txn_bytes);
        wl.get("max_block_txns", cfg.max_block_txns);
        wl.finish();
    }

    root.get("seed", cfg.seed);
    root.get("rounds", cfg.rounds);
    root.finish();

    cfg.validate();
    return cfg;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read scenario file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string to_json(const ScenarioConfig& cfg) {
    json doc;
    doc["n_players"] = cfg.n_players;
    doc["byzantine"] = {{"count", cfg.byzantine_count},
                        {"behavior", to_string(cfg.byzantine_behavior)}};
    json sched;
    switch (cfg.adaptive_policy) {
        case AdaptivePolicy::none: sched = "none"; break;
        case AdaptivePolicy::chase_leaders: sched = "chase_leaders"; break;
        case AdaptivePolicy::explicit_list: {
            sched = json::array();
            for (const auto& w : cfg.attack_windows)
                sched.push_back({{"targets", w.targets},
                                 {"start_ms", w.start_ms},
                                 {"stop_ms", w.stop_ms}});
            break;
        }
    }
    doc["adaptive"] = {{"count", cfg.adaptive_count}, {"schedule", sched}};
    doc["round"] = {{"T1_ms", cfg.t1_ms}, {"T2_ms", cfg.t2_ms}};
    doc["clock_skew_ms"] = cfg.clock_skew_ms;
    doc["q_numerator"] = cfg.q_numerator;
    doc["fanout"] = cfg.fanout;
    doc["connection_limit"] = cfg.connection_limit;
    doc["net"] = {{"latency_mean_ms", cfg.latency_mean_ms},
                  {"loss_rate", cfg.loss_rate},
                  {"bandwidth_Bps", cfg.bandwidth_bps},
                  {"verify_a_ms", cfg.verify_a_ms},
                  {"verify_b_ms", cfg.verify_b_ms}};
    doc["sync"] = {{"gst_ms", cfg.gst_ms}, {"delta_t_ms", cfg.delta_t_ms}};
    doc["workload"] = {{"tps", cfg.workload_tps},
                       {"txn_bytes", cfg.txn_bytes},
                       {"max_block_txns", cfg.max_block_txns}};
    doc["seed"] = cfg.seed;
    doc["rounds"] = cfg.rounds;
    return doc.dump();
}

}  // namespace gosig::scenario
