#include "gosig/trace.hpp"

#include <istream>
#include <ostream>

#include <json.hpp>

namespace gosig::trace {

using nlohmann::json;

namespace {

json base(const char* kind) { return json{{"kind", kind}}; }

void put_hash(json& j, const char* key, const Hash256& h) { j[key] = to_hex(h); }

Hash256 get_hash(const json& j, const char* key) {
    return from_hex(j.at(key).get<std::string>());
}

template <typename T>
void put_opt(json& j, const char* key, const std::optional<T>& v) {
    if (v)
        j[key] = *v;
    else
        j[key] = nullptr;
}

template <typename T>
std::optional<T> get_opt(const json& j, const char* key) {
    const auto& node = j.at(key);
    if (node.is_null()) return std::nullopt;
    return node.get<T>();
}

json encode_json(const Record& r) {
    return std::visit(
        [](const auto& v) -> json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Meta>) {
                json j = base("meta");
                j["v"] = v.version;
                j["n"] = v.n;
                j["f"] = v.f;
                j["seed"] = v.seed;
                j["byzantine"] = v.byzantine;
                j["behavior"] = v.behavior;
                j["config"] = v.config_json;
                j["manifest"] = v.manifest_json;
                return j;
            } else if constexpr (std::is_same_v<T, Round>) {
                json j = base("round");
                j["round"] = v.round;
                j["start_us"] = v.start_us;
                j["potential_leaders"] = v.potential_leaders;
                put_opt(j, "min_leader", v.min_leader);
                j["min_leader_faulty"] = v.min_leader_faulty;
                return j;
            } else if constexpr (std::is_same_v<T, Propose>) {
                json j = base("propose");
                j["round"] = v.round;
                j["player"] = v.player;
                j["height"] = v.height;
                put_hash(j, "block", v.block);
                j["score"] = v.score;
                j["time_us"] = v.time_us;
                return j;
            } else if constexpr (std::is_same_v<T, Vote>) {
                json j = base("vote");
                j["round"] = v.round;
                j["player"] = v.player;
                j["height"] = v.height;
                put_hash(j, "block", v.block);
                j["time_us"] = v.time_us;
                return j;
            } else if constexpr (std::is_same_v<T, TcSign>) {
                json j = base("tc_sign");
                j["round"] = v.round;
                j["player"] = v.player;
                j["height"] = v.height;
                put_hash(j, "block", v.block);
                j["time_us"] = v.time_us;
                return j;
            } else if constexpr (std::is_same_v<T, Commit>) {
                json j = base("commit");
                j["round"] = v.round;
                j["player"] = v.player;
                j["height"] = v.height;
                put_hash(j, "block", v.block);
                j["proposer"] = v.proposer;
                j["proposer_honest"] = v.proposer_honest;
                j["time_us"] = v.time_us;
                return j;
            } else if constexpr (std::is_same_v<T, Carry>) {
                json j = base("carry");
                j["round"] = v.round;
                j["player"] = v.player;
                j["height"] = v.height;
                put_hash(j, "block", v.block);
                j["freshness"] = v.freshness;
                return j;
            } else if constexpr (std::is_same_v<T, Attack>) {
                json j = base("attack");
                j["targets"] = v.targets;
                j["issued_us"] = v.issued_us;
                j["effective_us"] = v.effective_us;
                j["stop_us"] = v.stop_us;
                return j;
            } else if constexpr (std::is_same_v<T, RoundMetrics>) {
                json j = base("round_metrics");
                j["round"] = v.round;
                put_opt(j, "stage1_complete_us", v.stage1_complete_us);
                put_opt(j, "stage2_complete_us", v.stage2_complete_us);
                j["commits"] = v.commits;
                return j;
            } else if constexpr (std::is_same_v<T, Bytes>) {
                json j = base("bytes");
                j["player"] = v.player;
                j["sent"] = v.sent;
                return j;
            } else {
                static_assert(std::is_same_v<T, End>);
                json j = base("end");
                j["rounds"] = v.rounds;
                j["final_height"] = v.final_height;
                j["total_commits"] = v.total_commits;
                return j;
            }
        },
        r);
}

Record decode_json(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "meta") {
        Meta v;
        v.version = j.at("v").get<std::uint32_t>();
        if (v.version != schema_version)
            throw TraceError("unsupported trace schema version " + std::to_string(v.version));
        v.n = j.at("n").get<std::uint32_t>();
        v.f = j.at("f").get<std::uint32_t>();
        v.seed = j.at("seed").get<std::uint64_t>();
        v.byzantine = j.at("byzantine").get<std::vector<std::uint32_t>>();
        v.behavior = j.at("behavior").get<std::string>();
        v.config_json = j.at("config").get<std::string>();
        v.manifest_json = j.at("manifest").get<std::string>();
        return v;
    }
    if (kind == "round") {
        Round v;
        v.round = j.at("round").get<std::uint64_t>();
        v.start_us = j.at("start_us").get<std::int64_t>();
        v.potential_leaders = j.at("potential_leaders").get<std::uint32_t>();
        v.min_leader = get_opt<std::uint32_t>(j, "min_leader");
        v.min_leader_faulty = j.at("min_leader_faulty").get<bool>();
        return v;
    }
    if (kind == "propose") {
        Propose v;
        v.round = j.at("round").get<std::uint64_t>();
        v.player = j.at("player").get<std::uint32_t>();
        v.height = j.at("height").get<std::uint64_t>();
        v.block = get_hash(j, "block");
        v.score = j.at("score").get<double>();
        v.time_us = j.at("time_us").get<std::int64_t>();
        return v;
    }
    if (kind == "vote" || kind == "tc_sign") {
        Vote v;
        v.round = j.at("round").get<std::uint64_t>();
        v.player = j.at("player").get<std::uint32_t>();
        v.height = j.at("height").get<std::uint64_t>();
        v.block = get_hash(j, "block");
        v.time_us = j.at("time_us").get<std::int64_t>();
        if (kind == "vote") return v;
        return TcSign{v.round, v.player, v.height, v.block, v.time_us};
    }
    if (kind == "commit") {
        Commit v;
        v.round = j.at("round").get<std::uint64_t>();
        v.player = j.at("player").get<std::uint32_t>();
        v.height = j.at("height").get<std::uint64_t>();
        v.block = get_hash(j, "block");
        v.proposer = j.at("proposer").get<std::uint32_t>();
        v.proposer_honest = j.at("proposer_honest").get<bool>();
        v.time_us = j.at("time_us").get<std::int64_t>();
        return v;
    }
    if (kind == "carry") {
        Carry v;
        v.round = j.at("round").get<std::uint64_t>();
        v.player = j.at("player").get<std::uint32_t>();
        v.height = j.at("height").get<std::uint64_t>();
        v.block = get_hash(j, "block");
        v.freshness = j.at("freshness").get<std::uint64_t>();
        return v;
    }
    if (kind == "attack") {
        Attack v;
        v.targets = j.at("targets").get<std::vector<std::uint32_t>>();
        v.issued_us = j.at("issued_us").get<std::int64_t>();
        v.effective_us = j.at("effective_us").get<std::int64_t>();
        v.stop_us = j.at("stop_us").get<std::int64_t>();
        return v;
    }
    if (kind == "round_metrics") {
        RoundMetrics v;
        v.round = j.at("round").get<std::uint64_t>();
        v.stage1_complete_us = get_opt<std::int64_t>(j, "stage1_complete_us");
        v.stage2_complete_us = get_opt<std::int64_t>(j, "stage2_complete_us");
        v.commits = j.at("commits").get<std::uint32_t>();
        return v;
    }
    if (kind == "bytes") {
        Bytes v;
        v.player = j.at("player").get<std::uint32_t>();
        v.sent = j.at("sent").get<std::uint64_t>();
        return v;
    }
    if (kind == "end") {
        End v;
        v.rounds = j.at("rounds").get<std::uint64_t>();
        v.final_height = j.at("final_height").get<std::uint64_t>();
        v.total_commits = j.at("total_commits").get<std::uint64_t>();
        return v;
    }
    throw TraceError("unknown record kind: " + kind);
}

}  // namespace

std::string encode(const Record& r) { return encode_json(r).dump(); }

Record decode(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw TraceError(std::string("malformed trace line: ") + e.what());
    }
    try {
        return decode_json(j);
    } catch (const json::exception& e) {
        throw TraceError(std::string("bad trace record: ") + e.what());
    }
}

void TraceWriter::write(const Record& r) {
    std::string line = encode(r);
    if (out_) (*out_) << line << '\n';
    std::vector<std::uint8_t> buf;
    buf.reserve(digest_.size() + line.size() + 1);
    buf.insert(buf.end(), digest_.begin(), digest_.end());
    buf.insert(buf.end(), line.begin(), line.end());
    buf.push_back('\n');
    digest_ = sha256(buf);
    ++lines_;
}

std::optional<Record> TraceReader::next() {
    std::string line;
    while (std::getline(*in_, line)) {
        ++line_;
        if (line.empty()) continue;
        try {
            return decode(line);
        } catch (const TraceError& e) {
            throw TraceError("line " + std::to_string(line_) + ": " + e.what());
        }
    }
    return std::nullopt;
}

}  // namespace gosig::trace
