#include "gosig/simnet.hpp"

#include <algorithm>
#include <cstring>
#include <deque>
#include <memory>
#include <queue>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "gosig/consensus.hpp"
#include "gosig/ledger.hpp"
#include "gosig/rng.hpp"
#include "gosig/sigagg.hpp"

namespace gosig::simnet {

namespace {

using consensus::HandlerOutput;
using consensus::Player;
using consensus::PlayerConfig;
using consensus::PMessage;
using consensus::PrMessage;
using consensus::TcMessage;
using scenario::AdaptivePolicy;
using scenario::ByzantineBehavior;
using scenario::ScenarioConfig;

constexpr std::size_t kSigModelBits = 2048;  // reported-size model for all signatures
constexpr std::uint32_t kCounterBits = 32;
// Gossip repeats per acquired proposal: one burst on acquisition plus this
// many step re-sends.  Keeps expected in-degree around 2*fanout, which makes
// full Stage I coverage overwhelmingly likely at 1% loss.
constexpr std::uint32_t kPushRepeats = 1;

struct Payload {
    enum class Type : std::uint8_t {
        pr,
        p,
        tc,
        block_req,
        chain_req,
        block_resp,
        chain_resp,
        txn,
    };
    Type type = Type::pr;
    std::shared_ptr<const PrMessage> pr;
    PMessage p;
    TcMessage tc;
    Hash256 block_hash{};           // block_req
    std::uint64_t from_height = 0;  // chain_req
    std::uint32_t requester = 0;    // rpc reply address
    std::optional<ledger::Block> block;      // block_resp
    std::vector<std::uint8_t> chain_bytes;   // chain_resp
    ledger::Transaction txn;

    std::uint64_t id = 0;  // sim-unique identity; duplicates dedup on this
    std::size_t wire_bytes = 0;
    std::uint32_t verify_k = 1;  // distinct signers for the cost model
};
using PayloadPtr = std::shared_ptr<const Payload>;

enum class Ev : std::uint8_t {
    round_start,
    stage2_start,
    round_end,
    step,
    resend,
    proc_begin,
    proc_exec,
    deliver,
    txn_submit,
    attack_flush,
};

struct Event {
    std::int64_t t = 0;
    std::uint64_t seq = 0;
    Ev kind = Ev::round_start;
    std::uint32_t player = 0;
    std::uint64_t round = 0;
    PayloadPtr payload;
    std::uint32_t from = 0;
};

struct EventLater {
    bool operator()(const Event& a, const Event& b) const {
        if (a.t != b.t) return a.t > b.t;
        return a.seq > b.seq;
    }
};

struct Delivery {
    PayloadPtr payload;
    std::uint32_t from = 0;
};

struct Peer {
    std::unique_ptr<Player> logic;
    ByzantineBehavior behavior = ByzantineBehavior::silent;
    bool byzantine = false;

    std::int64_t offset_us = 0;
    std::uint64_t round = 0;
    bool stage2 = false;

    std::vector<Delivery> inbox;  // LIFO stack: newest arrival processed first
    std::vector<Delivery> held;   // future-round arrivals, replayed at round start
    bool proc_pending = false;
    std::int64_t busy_until_us = 0;
    std::optional<Delivery> executing;

    std::int64_t link_free_us = 0;
    std::uint64_t bytes_sent = 0;
    std::unique_ptr<Backoff> backoff;
    std::unordered_set<std::uint64_t> seen;  // processed payload ids, per round

    std::vector<std::pair<PayloadPtr, std::uint32_t>> push_queue;  // (pr, repeats left)
    PayloadPtr fresh_p;   // latest own aggregate for continuous re-gossip
    PayloadPtr fresh_tc;  // once set, preferred over fresh_p

    std::vector<ledger::Transaction> pool;
    std::vector<PayloadPtr> stash;  // arbitrary_relay ammunition

    // Stage I coverage bookkeeping (metrics only).
    std::uint32_t prs_got = 0;
    std::unordered_set<std::uint64_t> pr_seen_round;
};

struct ActiveAttack {
    std::vector<std::uint32_t> targets;
    std::int64_t effective_us = 0;
    std::int64_t stop_us = 0;
};

class Simulation {
public:
    Simulation(const ScenarioConfig& cfg, const RunOptions& opts)
        : cfg_(cfg),
          scheme_(cfg.seed, cfg.n_players, kCounterBits),
          genesis_q_(HashWriter().str("gosig.sim.genesisQ").u64(cfg.seed).finish()),
          master_rng_(cfg.seed),
          offsets_rng_(master_rng_.fork()),
          net_rng_(master_rng_.fork()),
          workload_rng_(master_rng_.fork()),
          writer_(opts.trace_out),
          sink_(opts.sink) {
        t1_us_ = cfg.t1_ms * 1000;
        t2_us_ = cfg.t2_ms * 1000;
        t_us_ = t1_us_ + t2_us_;
        step_us_ = std::max<std::int64_t>(1000, static_cast<std::int64_t>(cfg.latency_mean_ms * 1000.0));
        delta_t_us_ = cfg.delta_t_ms * 1000;
        gst_us_ = cfg.gst_ms * 1000;
        backoff_unit_us_ = t_us_ / 2;
        msig_bytes_ = sigagg::encoded_size(cfg.n_players, kSigModelBits, kCounterBits);

        std::vector<std::uint32_t> byz_list;
        for (std::uint32_t i = cfg_.first_byzantine(); i < cfg_.n_players; ++i)
            byz_list.push_back(i);

        trace::Meta meta;
        meta.n = cfg_.n_players;
        meta.f = cfg_.f();
        meta.seed = cfg_.seed;
        meta.byzantine = byz_list;
        meta.behavior = byz_list.empty() ? "" : scenario::to_string(cfg_.byzantine_behavior);
        meta.config_json = scenario::to_json(cfg_);
        meta.manifest_json = opts.manifest_json;
        put(meta);

        peers_.resize(cfg_.n_players);
        for (std::uint32_t i = 0; i < cfg_.n_players; ++i) {
            Peer& p = peers_[i];
            p.byzantine = cfg_.is_byzantine(i);
            p.behavior = cfg_.byzantine_behavior;
            p.offset_us = cfg_.clock_skew_ms == 0
                              ? 0
                              : static_cast<std::int64_t>((offsets_rng_.uniform() - 0.5) *
                                                          static_cast<double>(cfg_.clock_skew_ms) *
                                                          1000.0);
            PlayerConfig pc;
            pc.n = cfg_.n_players;
            pc.f = cfg_.f();
            pc.q_threshold = cfg_.q_threshold();
            pc.max_block_txns = cfg_.max_block_txns;
            pc.propose = !p.byzantine;  // byzantine proposals are sim-crafted
            p.logic = std::make_unique<Player>(scheme_, scheme_.key(i), pc,
                                               ledger::ChainReplica(genesis_q_),
                                               master_rng_.u64());
            p.backoff = std::make_unique<Backoff>(backoff_unit_us_);
            p.logic->set_sink(
                [this, i](const consensus::Transition& tr) { on_transition(i, tr); });
            schedule(p.offset_us, Ev::round_start, i, 1);
        }

        if (cfg_.adaptive_policy == AdaptivePolicy::explicit_list) {
            for (const auto& w : cfg_.attack_windows) {
                ActiveAttack a;
                a.targets = w.targets;
                a.effective_us = w.start_ms * 1000 + delta_t_us_;
                a.stop_us = w.stop_ms * 1000;
                put(trace::Attack{w.targets, w.start_ms * 1000, a.effective_us, a.stop_us});
                attacks_.push_back(a);
                schedule(a.effective_us, Ev::attack_flush, 0, 0);
            }
        }

        if (cfg_.workload_tps > 0)
            schedule(next_txn_gap(), Ev::txn_submit, 0, 0);

        end_time_ = static_cast<std::int64_t>(cfg_.rounds) * t_us_ +
                    (cfg_.clock_skew_ms * 1000) / 2 + 1;
    }

    RunResult run() {
        while (!queue_.empty()) {
            Event ev = queue_.top();
            queue_.pop();
            if (ev.t > end_time_) break;
            now_ = ev.t;
            dispatch_event(ev);
        }
        for (std::uint32_t i = 0; i < cfg_.n_players; ++i)
            put(trace::Bytes{i, peers_[i].bytes_sent});
        std::uint64_t final_height = 0;
        for (std::uint32_t i = 0; i < cfg_.first_byzantine(); ++i)
            final_height = std::max(final_height, peers_[i].logic->h_root());
        put(trace::End{cfg_.rounds, final_height, total_commits_});

        RunResult res;
        res.trace_digest = writer_.digest();
        res.trace_lines = writer_.lines();
        res.total_commits = total_commits_;
        res.final_height = final_height;
        res.rounds = cfg_.rounds;
        return res;
    }

private:
    // ---- plumbing -----------------------------------------------------------

    void put(const trace::Record& r) {
        writer_.write(r);
        if (sink_) sink_(r);
    }

    void schedule(std::int64_t t, Ev kind, std::uint32_t player, std::uint64_t round,
                  PayloadPtr payload = nullptr, std::uint32_t from = 0) {
        queue_.push(Event{t, seq_++, kind, player, round, std::move(payload), from});
    }

    bool honest(std::uint32_t i) const { return !peers_[i].byzantine; }

    bool attacked(std::uint32_t i, std::int64_t t) const {
        for (const auto& a : attacks_) {
            if (t < a.effective_us || t >= a.stop_us) continue;
            if (std::find(a.targets.begin(), a.targets.end(), i) != a.targets.end()) return true;
        }
        return false;
    }

    // Crashed-equivalent: silent statics never act; adaptive victims are dark
    // for the attack window.
    bool alive(std::uint32_t i, std::int64_t t) const {
        if (peers_[i].byzantine && peers_[i].behavior == ByzantineBehavior::silent) return false;
        return !attacked(i, t);
    }

    bool stabilized(std::int64_t t) const { return cfg_.gst_ms >= 0 && t >= gst_us_; }

    std::int64_t us_from_bytes(std::size_t bytes) const {
        return static_cast<std::int64_t>(static_cast<double>(bytes) * 1e6 / cfg_.bandwidth_bps);
    }

    std::int64_t verify_cost_us(std::uint32_t k) const {
        return static_cast<std::int64_t>((cfg_.verify_a_ms + cfg_.verify_b_ms * k) * 1000.0);
    }

    std::int64_t next_txn_gap() {
        return static_cast<std::int64_t>(workload_rng_.exponential(1e6 / cfg_.workload_tps));
    }

    // ---- payload factories --------------------------------------------------

    PayloadPtr wrap_pr(std::shared_ptr<const PrMessage> pr) {
        auto it = pr_payloads_.find(pr.get());
        if (it != pr_payloads_.end()) return it->second;
        auto pay = std::make_shared<Payload>();
        pay->id = ++payload_seq_;
        pay->type = Payload::Type::pr;
        std::size_t cert_tc = pr->cert.tc ? 48 + 2 * msig_bytes_ : 0;
        pay->wire_bytes = 84 + 32 * pr->block.txn_hashes.size() + kSigModelBits / 8 +  // block
                          1 + cert_tc +                                                // cert
                          kSigModelBits / 8 + 16 +                                     // leader proof
                          kSigModelBits / 8;                                           // proposer sig
        auto cert_k = static_cast<std::uint32_t>(
            pr->cert.tc ? pr->cert.tc->sig.signer_count() + pr->cert.tc->p_proof.signer_count()
                        : 0);
        pay->verify_k = 3 + cert_k;
        pay->pr = std::move(pr);
        PayloadPtr ptr = pay;
        pr_payloads_.emplace(ptr->pr.get(), ptr);
        return ptr;
    }

    PayloadPtr wrap_p(PMessage msg) {
        auto pay = std::make_shared<Payload>();
        pay->id = ++payload_seq_;
        pay->type = Payload::Type::p;
        pay->wire_bytes = 48 + msig_bytes_;
        pay->verify_k = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(msg.sig.signer_count()));
        pay->p = std::move(msg);
        return pay;
    }

    PayloadPtr wrap_tc(TcMessage msg) {
        auto pay = std::make_shared<Payload>();
        pay->id = ++payload_seq_;
        pay->type = Payload::Type::tc;
        pay->wire_bytes = 48 + 2 * msig_bytes_;
        pay->verify_k = std::max<std::uint32_t>(
            1, static_cast<std::uint32_t>(msg.sig.signer_count() + msg.p_proof.signer_count()));
        pay->tc = std::move(msg);
        return pay;
    }

    // ---- send paths ----------------------------------------------------------

    void send_one(std::uint32_t from, std::uint32_t to, const PayloadPtr& payload,
                  bool count_failure = true) {
        if (to == from || to >= cfg_.n_players) return;
        Peer& src = peers_[from];
        if (!alive(to, now_)) {
            // Connect failure is visible to the sender; back off this peer.
            if (count_failure) src.backoff->record_failure(to, now_);
            return;
        }
        std::int64_t transmit = us_from_bytes(payload->wire_bytes);
        std::int64_t depart = std::max(now_, src.link_free_us);
        src.link_free_us = depart + transmit;
        src.bytes_sent += payload->wire_bytes;
        bool clamped = stabilized(now_) && honest(from) && honest(to);
        bool lost = net_rng_.chance(cfg_.loss_rate);
        std::int64_t latency =
            static_cast<std::int64_t>(net_rng_.exponential(cfg_.latency_mean_ms) * 1000.0);
        if (clamped)
            latency = std::min(latency, delta_t_us_ / 2);
        else if (lost)
            return;
        schedule(depart + transmit + latency, Ev::deliver, to, 0, payload, from);
    }

    std::vector<std::uint32_t> pick_targets(std::uint32_t from, std::uint32_t want) {
        std::vector<std::uint32_t> out;
        if (cfg_.n_players <= 1) return out;
        want = std::min(want, cfg_.n_players - 1);
        const Peer& src = peers_[from];
        std::uint32_t attempts = 0;
        const std::uint32_t cap = want * 6 + 8;
        while (out.size() < want && attempts < cap) {
            ++attempts;
            auto cand = static_cast<std::uint32_t>(net_rng_.below(cfg_.n_players));
            if (cand == from) continue;
            if (std::find(out.begin(), out.end(), cand) != out.end()) continue;
            // Prefer non-blacklisted peers; under scarcity fall back to anyone.
            if (src.backoff->blocked(cand, now_) && attempts < cap / 2) continue;
            out.push_back(cand);
        }
        return out;
    }

    void send_gossip(std::uint32_t from, const PayloadPtr& payload, std::uint32_t width) {
        for (auto to : pick_targets(from, width)) send_one(from, to, payload);
    }

    // ---- trace sink -----------------------------------------------------------

    void on_transition(std::uint32_t i, const consensus::Transition& tr) {
        const Peer& p = peers_[i];
        if (std::strcmp(tr.event, "prepare") == 0) {
            put(trace::Vote{tr.round, i, p.logic->chain().height() + 1, tr.block_hash, now_});
        } else if (std::strcmp(tr.event, "tentative_commit") == 0) {
            put(trace::TcSign{tr.round, i, p.logic->chain().height() + 1, tr.block_hash, now_});
        } else if (std::strcmp(tr.event, "commit") == 0) {
            std::uint64_t h = p.logic->h_root();
            std::uint32_t proposer = p.logic->chain().head()->proposer;
            put(trace::Commit{tr.round, i, h, tr.block_hash, proposer, honest(proposer), now_});
            ++total_commits_;
            ++round_commit_count_;
            if (honest(i) && stage2_live_.count(i)) {
                round_committed_.insert(i);
                if (!stage2_done_ && round_committed_.size() == stage2_live_.size()) {
                    stage2_done_ =
                        std::max<std::int64_t>(0, now_ - (round_min_start_ + t1_us_));
                    // Every live honest player holds the block: further
                    // re-gossip this round is pure noise, skip it.
                    round_quiet_ = true;
                }
            }
        }
    }

    // ---- round lifecycle -------------------------------------------------------

    void round_begin_global(std::uint64_t r) {
        cur_round_ = r;
        round_min_start_ = now_;
        round_commit_count_ = 0;
        round_quiet_ = false;
        round_committed_.clear();
        stage1_done_.reset();
        stage2_done_.reset();
        issued_count_ = 0;
        stage1_complete_players_ = 0;
        issued_prs_.clear();
        pr_payloads_.clear();  // cross-round re-wraps get fresh identities

        // Retire finished attack windows; retarget the chasing adversary.
        std::erase_if(attacks_, [&](const ActiveAttack& a) { return a.stop_us <= now_; });
        if (cfg_.adaptive_policy == AdaptivePolicy::chase_leaders && !prev_proposers_.empty()) {
            ActiveAttack a;
            for (auto t : prev_proposers_) {
                if (!honest(t)) continue;
                a.targets.push_back(t);
                if (a.targets.size() >= cfg_.adaptive_count) break;
            }
            if (!a.targets.empty()) {
                a.effective_us = now_ + delta_t_us_;
                a.stop_us = now_ + t_us_;
                put(trace::Attack{a.targets, now_, a.effective_us, a.stop_us});
                attacks_.push_back(a);
                schedule(a.effective_us, Ev::attack_flush, 0, 0);
            }
        }
        prev_proposers_.clear();

        // Omniscient sortition stats over the honest frontier chain.
        const ledger::ChainReplica* frontier = nullptr;
        for (std::uint32_t i = 0; i < cfg_.first_byzantine(); ++i) {
            const auto& c = peers_[i].logic->chain();
            if (!frontier || c.height() > frontier->height()) frontier = &c;
        }
        trace::Round rec;
        rec.round = r;
        rec.start_us = now_;
        double best = 2.0;
        std::uint32_t best_i = 0;
        for (std::uint32_t i = 0; i < cfg_.n_players; ++i) {
            double s =
                scheme_.leader_score(scheme_.key(i), r, frontier->sortition()).score;
            if (s < cfg_.q_threshold()) ++rec.potential_leaders;
            if (s < best) {
                best = s;
                best_i = i;
            }
        }
        if (rec.potential_leaders > 0) {
            rec.min_leader = best_i;
            rec.min_leader_faulty = !honest(best_i) || attacked(best_i, now_);
        }
        put(rec);

        for (auto& p : peers_) {
            p.prs_got = 0;
            p.pr_seen_round.clear();
        }
        stage1_live_.clear();
        stage2_live_.clear();
        for (std::uint32_t i = 0; i < cfg_.first_byzantine(); ++i) {
            // Players silenced at any point of the round are excluded from
            // the completion denominators; their absence is reported, not
            // zero-filled.
            bool dark = false;
            for (const auto& a : attacks_)
                if (a.effective_us < now_ + t_us_ && a.stop_us > now_ &&
                    std::find(a.targets.begin(), a.targets.end(), i) != a.targets.end())
                    dark = true;
            if (dark) continue;
            stage1_live_.insert(i);
            stage2_live_.insert(i);
        }
    }

    void mark_pr_issued(const PayloadPtr& pay) {
        issued_prs_.insert(pay->id);
        ++issued_count_;
        // A new proposal resets everyone's completeness count.
        stage1_complete_players_ = 0;
        for (auto i : stage1_live_)
            if (peers_[i].prs_got == issued_count_) ++stage1_complete_players_;
    }

    void mark_pr_received(std::uint32_t i, const PayloadPtr& pay) {
        if (!issued_prs_.count(pay->id)) return;
        Peer& p = peers_[i];
        if (p.round != cur_round_) return;
        if (!stage1_live_.count(i)) return;
        if (!p.pr_seen_round.insert(pay->id).second) return;
        ++p.prs_got;
        if (p.prs_got == issued_count_) {
            ++stage1_complete_players_;
            if (!stage1_done_ && stage1_complete_players_ == stage1_live_.size())
                stage1_done_ = now_ - round_min_start_;
        }
    }

    consensus::PrMessage craft_pr(std::uint32_t i, std::uint64_t r,
                                  const sigagg::LeaderProof& proof,
                                  std::span<const ledger::Transaction> txns) {
        const auto& view = peers_[i].logic->chain();
        consensus::PrMessage pr;
        pr.proposer = i;
        pr.leader_proof = proof;
        auto seed = scheme_.sign_atomic(scheme_.key(i),
                                        sigagg::seed_message_digest(view.sortition().q));
        pr.block = ledger::make_block(view.head(), txns, i, r, seed, cfg_.max_block_txns,
                                      view.committed_txns());
        if (view.height() == 0) {
            pr.cert.kind = ledger::ProposalCertificate::Kind::genesis;
        } else {
            pr.cert.kind = ledger::ProposalCertificate::Kind::case2;
            pr.cert.tc = view.cert_at(view.height())->tc;
        }
        pr.proposer_sig = scheme_.sign_atomic(
            scheme_.key(i),
            consensus::pr_digest(pr.proposer, pr.block, pr.cert, pr.leader_proof));
        return pr;
    }

    void launch_pr(std::uint32_t i, PayloadPtr pay, double score) {
        put(trace::Propose{cur_round_, i, pay->pr->block.height, pay->pr->block.block_hash,
                           score, now_});
        prev_proposers_.push_back(i);
        mark_pr_issued(pay);
        mark_pr_received(i, pay);  // the proposer trivially holds its own PR
        send_gossip(i, pay, cfg_.fanout);
        if (kPushRepeats > 0) peers_[i].push_queue.emplace_back(pay, kPushRepeats);
    }

    void ev_round_start(std::uint32_t i, std::uint64_t r) {
        Peer& p = peers_[i];
        p.round = r;
        p.stage2 = false;
        p.push_queue.clear();
        p.fresh_p = nullptr;
        p.fresh_tc = nullptr;
        p.prs_got = 0;
        p.pr_seen_round.clear();
        p.seen.clear();
        if (!p.held.empty()) {
            for (auto& d : p.held) p.inbox.push_back(std::move(d));
            p.held.clear();
            try_schedule_proc(i);
        }
        if (round_starts_[r]++ == 0) round_begin_global(r);

        schedule(now_ + t1_us_, Ev::stage2_start, i, r);
        schedule(now_ + t_us_, Ev::round_end, i, r);
        schedule(now_ + step_us_, Ev::step, i, r);

        if (!alive(i, now_)) return;

        // Prune committed transactions from the pool.
        std::erase_if(p.pool, [&](const ledger::Transaction& t) {
            return p.logic->chain().txn_committed(t.id);
        });

        if (p.byzantine) {
            switch (p.behavior) {
                case ByzantineBehavior::equivocate: {
                    p.logic->on_round_start(r, {});
                    auto proof =
                        scheme_.leader_score(scheme_.key(i), r, p.logic->chain().sortition());
                    if (proof.score < cfg_.q_threshold()) {
                        for (std::uint8_t variant = 0; variant < 2; ++variant) {
                            std::vector<ledger::Transaction> txns;
                            if (variant)
                                txns.push_back(ledger::make_transaction(
                                    {0xE0, static_cast<std::uint8_t>(i),
                                     static_cast<std::uint8_t>(r), variant},
                                    now_));
                            auto pr = std::make_shared<const PrMessage>(
                                craft_pr(i, r, proof, txns));
                            launch_pr(i, wrap_pr(pr), proof.score);
                        }
                    }
                    break;
                }
                case ByzantineBehavior::overflow_attacker:
                    p.logic->on_round_start(r, {});
                    break;
                case ByzantineBehavior::arbitrary_relay:
                case ByzantineBehavior::silent:
                    break;
            }
            return;
        }

        auto pr = p.logic->on_round_start(r, std::span<const ledger::Transaction>(p.pool));
        if (pr) {
            double score = pr->leader_proof.score;
            auto shared = std::make_shared<const PrMessage>(std::move(*pr));
            launch_pr(i, wrap_pr(shared), score);
        }
    }

    void ev_stage2_start(std::uint32_t i, std::uint64_t r) {
        Peer& p = peers_[i];
        if (p.round != r) return;
        p.stage2 = true;
        schedule(now_ + resend_period(i), Ev::resend, i, r);
        if (!alive(i, now_)) return;
        if (p.byzantine && (p.behavior == ByzantineBehavior::silent ||
                            p.behavior == ByzantineBehavior::arbitrary_relay))
            return;
        absorb(i, p.logic->on_stage2_start());
    }

    // Continuous Stage II gossip runs as fast as the outbound link allows,
    // throttling to a slow heartbeat once the player has committed.
    // Paced so aggregate arrivals roughly match what a receiver can verify:
    // each sender contributes connection_limit sends per period to random
    // targets, so per-receiver arrival rate is connection_limit / period.
    std::int64_t resend_period(std::uint32_t i) const {
        const Peer& p = peers_[i];
        if (p.logic->phase() == consensus::Phase::ced) return step_us_;
        std::uint32_t k = 1;
        if (p.fresh_tc)
            k = p.fresh_tc->verify_k;
        else if (p.fresh_p)
            k = p.fresh_p->verify_k;
        const std::int64_t vc = verify_cost_us(k);
        const std::int64_t link = us_from_bytes(p.fresh_tc   ? p.fresh_tc->wire_bytes
                                                : p.fresh_p ? p.fresh_p->wire_bytes
                                                            : 48 + 2 * msig_bytes_);
        return std::max<std::int64_t>(
            50'000, std::max(vc, link) * static_cast<std::int64_t>(cfg_.connection_limit));
    }

    void ev_resend(std::uint32_t i, std::uint64_t r) {
        Peer& p = peers_[i];
        if (p.round != r || !p.stage2 || round_quiet_) return;
        std::int64_t round_end_t = static_cast<std::int64_t>(r) * t_us_ + p.offset_us;
        if (alive(i, now_)) {
            if (p.byzantine && p.behavior == ByzantineBehavior::overflow_attacker) {
                if (const auto* agg = p.logic->p_aggregate(); agg && p.fresh_p) {
                    // Counter poisoning: one signer pushed to 2^B - 1 with a
                    // matching tag; verifies, but honest merge guards reject it.
                    sigagg::MultiSignature m = *agg;
                    m.counters[i] = static_cast<std::uint32_t>(scheme_.max_counter());
                    m.tag = scheme_.tag_for(m.message_digest, m.counters);
                    PMessage crafted = p.fresh_p->p;
                    crafted.sig = std::move(m);
                    send_gossip(i, wrap_p(std::move(crafted)), cfg_.connection_limit);
                }
            } else if (p.byzantine && p.behavior == ByzantineBehavior::arbitrary_relay) {
                if (!p.stash.empty())
                    send_gossip(i, p.stash[net_rng_.below(p.stash.size())],
                                cfg_.connection_limit);
            } else if (p.fresh_tc) {
                send_gossip(i, p.fresh_tc, cfg_.connection_limit);
            } else if (p.fresh_p) {
                send_gossip(i, p.fresh_p, cfg_.connection_limit);
            }
        }
        std::int64_t next = now_ + resend_period(i);
        if (next < round_end_t) schedule(next, Ev::resend, i, r);
    }

    void ev_round_end(std::uint32_t i, std::uint64_t r) {
        Peer& p = peers_[i];
        if (p.round == r && alive(i, now_)) {
            bool participates =
                !p.byzantine || p.behavior == ByzantineBehavior::equivocate ||
                p.behavior == ByzantineBehavior::overflow_attacker;
            if (participates) {
                if (honest(i) && p.logic->b_tc())
                    put(trace::Carry{r, i, p.logic->b_tc()->height, p.logic->b_tc()->block_hash,
                                     p.logic->freshness()});
                p.logic->on_round_end();
            }
        }
        if (++round_ends_[r] == cfg_.n_players) {
            trace::RoundMetrics m;
            m.round = r;
            m.stage1_complete_us = stage1_done_;
            m.stage2_complete_us = stage2_done_;
            m.commits = round_commit_count_;
            put(m);
        }
        if (r < cfg_.rounds) schedule(now_, Ev::round_start, i, r + 1);
    }

    void ev_step(std::uint32_t i, std::uint64_t r) {
        Peer& p = peers_[i];
        if (p.round != r) return;
        std::int64_t round_end_t = static_cast<std::int64_t>(r) * t_us_ + p.offset_us;
        if (alive(i, now_)) {
            for (auto& [pay, left] : p.push_queue) {
                send_gossip(i, pay, cfg_.fanout);
                --left;
            }
            std::erase_if(p.push_queue, [](const auto& e) { return e.second == 0; });
        }
        if (now_ + step_us_ < round_end_t) schedule(now_ + step_us_, Ev::step, i, r);
    }

    void ev_attack_flush(std::int64_t t) {
        for (const auto& a : attacks_) {
            if (a.effective_us != t) continue;
            for (auto v : a.targets) {
                peers_[v].inbox.clear();
                peers_[v].held.clear();
                peers_[v].executing.reset();
                peers_[v].proc_pending = false;
            }
        }
    }

    // ---- message processing -----------------------------------------------------

    void ev_deliver(std::uint32_t to, PayloadPtr payload, std::uint32_t from) {
        Peer& p = peers_[to];
        if (!alive(to, now_)) return;
        p.backoff->record_contact(from);
        if (payload->type == Payload::Type::txn) {
            if (!p.logic->chain().txn_committed(payload->txn.id)) p.pool.push_back(payload->txn);
            return;
        }
        if (p.byzantine && p.behavior == ByzantineBehavior::arbitrary_relay) {
            if (p.stash.size() >= 64)
                p.stash[net_rng_.below(p.stash.size())] = payload;
            else
                p.stash.push_back(payload);
            return;
        }
        if (p.byzantine && p.behavior == ByzantineBehavior::silent) return;
        p.inbox.push_back(Delivery{std::move(payload), from});
        try_schedule_proc(to);
    }

    void try_schedule_proc(std::uint32_t i) {
        Peer& p = peers_[i];
        if (p.proc_pending || p.inbox.empty()) return;
        p.proc_pending = true;
        schedule(std::max(now_, p.busy_until_us), Ev::proc_begin, i, 0);
    }

    // Round-tagged gossip is triaged on the (free) header check before any
    // signature work: stale rounds are discarded, future rounds (clock skew)
    // are held for the local round boundary.  TC messages claiming
    // certificate strength are the exception: a 2f+1 TC commits at any time,
    // so those are always verified.
    enum class Triage : std::uint8_t { verify, stale, future };

    Triage triage(const Peer& p, const Payload& pay) const {
        std::uint64_t r = 0;
        switch (pay.type) {
            case Payload::Type::pr: r = pay.pr->leader_proof.round; break;
            case Payload::Type::p: r = pay.p.round; break;
            case Payload::Type::tc:
                if (pay.tc.sig.signer_count() >= 2 * cfg_.f() + 1) return Triage::verify;
                r = pay.tc.round;
                break;
            default:
                return Triage::verify;
        }
        if (r == p.round) return Triage::verify;
        return r > p.round ? Triage::future : Triage::stale;
    }

    void ev_proc_begin(std::uint32_t i) {
        Peer& p = peers_[i];
        if (!alive(i, now_)) {
            p.proc_pending = false;
            return;
        }
        // LIFO: newest arrival first; duplicates of already-processed payloads
        // cost a lookup, not a verification.
        while (!p.inbox.empty()) {
            Delivery d = std::move(p.inbox.back());
            p.inbox.pop_back();
            if (!p.seen.insert(d.payload->id).second) continue;
            Triage t = triage(p, *d.payload);
            if (t == Triage::stale) continue;
            if (t == Triage::future) {
                p.seen.erase(d.payload->id);
                p.held.push_back(std::move(d));
                continue;
            }
            p.busy_until_us = now_ + verify_cost_us(d.payload->verify_k);
            p.executing = std::move(d);
            schedule(p.busy_until_us, Ev::proc_exec, i, 0);
            return;
        }
        p.proc_pending = false;
    }

    void ev_proc_exec(std::uint32_t i) {
        Peer& p = peers_[i];
        if (!p.executing) {
            p.proc_pending = false;
            return;
        }
        Delivery d = std::move(*p.executing);
        p.executing.reset();
        if (alive(i, now_)) handle(i, d);
        p.proc_pending = false;
        try_schedule_proc(i);
    }

    void handle(std::uint32_t i, const Delivery& d) {
        Peer& p = peers_[i];
        const Payload& pay = *d.payload;
        switch (pay.type) {
            case Payload::Type::pr: {
                mark_pr_received(i, d.payload);
                auto out = p.logic->on_stage1_message(pay.pr);
                absorb(i, std::move(out));
                break;
            }
            case Payload::Type::p:
                absorb(i, p.logic->on_p_message(pay.p));
                break;
            case Payload::Type::tc:
                absorb(i, p.logic->on_tc_message(pay.tc));
                break;
            case Payload::Type::block_req: {
                auto b = p.logic->serve_block(pay.block_hash);
                if (b) {
                    auto resp = std::make_shared<Payload>();
                    resp->id = ++payload_seq_;
                    resp->type = Payload::Type::block_resp;
                    resp->wire_bytes = 116 + 32 * b->txn_hashes.size() + kSigModelBits / 8;
                    resp->verify_k = 2;
                    resp->block = std::move(*b);
                    send_one(i, pay.requester, std::move(resp));
                }
                break;
            }
            case Payload::Type::chain_req: {
                auto bytes = p.logic->serve_chain(pay.from_height);
                if (!bytes.empty()) {
                    auto resp = std::make_shared<Payload>();
                    resp->id = ++payload_seq_;
                    resp->type = Payload::Type::chain_resp;
                    resp->wire_bytes = bytes.size();
                    resp->verify_k = 2 * cfg_.f() + 1;
                    resp->chain_bytes = std::move(bytes);
                    send_one(i, pay.requester, std::move(resp));
                }
                break;
            }
            case Payload::Type::block_resp:
                absorb(i, p.logic->on_block_response(*pay.block));
                break;
            case Payload::Type::chain_resp:
                absorb(i, p.logic->on_chain_response(pay.chain_bytes));
                break;
            case Payload::Type::txn:
                break;  // handled at delivery
        }
    }

    void absorb(std::uint32_t i, HandlerOutput&& out) {
        Peer& p = peers_[i];
        bool suppress = p.byzantine && p.behavior == ByzantineBehavior::overflow_attacker;
        for (auto& pr : out.relays) {
            PayloadPtr pay = wrap_pr(pr);
            if (suppress) continue;
            // Forward on first acquisition, then keep pushing at step cadence.
            send_gossip(i, pay, cfg_.fanout);
            if (kPushRepeats > 0) p.push_queue.emplace_back(pay, kPushRepeats);
        }
        // Aggregation gossip: push the freshest aggregate immediately when it
        // improves, and keep re-sending it at step cadence for stragglers.
        if (!out.p_msgs.empty()) {
            p.fresh_p = wrap_p(std::move(out.p_msgs.back()));
            if (!suppress && !round_quiet_) send_gossip(i, p.fresh_p, cfg_.connection_limit);
        }
        if (!out.tc_msgs.empty()) {
            p.fresh_tc = wrap_tc(std::move(out.tc_msgs.back()));
            if (!suppress && !round_quiet_) send_gossip(i, p.fresh_tc, cfg_.connection_limit);
        }
        for (const auto& req : out.block_requests) {
            auto pay = std::make_shared<Payload>();
            pay->id = ++payload_seq_;
            pay->type = Payload::Type::block_req;
            pay->wire_bytes = 52;
            pay->verify_k = 1;
            pay->block_hash = req.block_hash;
            pay->requester = i;
            if (!suppress) send_one(i, req.target, std::move(pay));
        }
        for (const auto& req : out.chain_requests) {
            auto pay = std::make_shared<Payload>();
            pay->id = ++payload_seq_;
            pay->type = Payload::Type::chain_req;
            pay->wire_bytes = 52;
            pay->verify_k = 1;
            pay->from_height = req.from_height;
            pay->requester = i;
            if (!suppress) send_one(i, req.target, std::move(pay));
        }
    }

    void ev_txn_submit() {
        auto origin = static_cast<std::uint32_t>(workload_rng_.below(cfg_.n_players));
        std::vector<std::uint8_t> body(cfg_.txn_bytes, 0);
        std::uint64_t nonce = workload_rng_.u64();
        std::memcpy(body.data(), &nonce, std::min<std::size_t>(8, body.size()));
        auto pay = std::make_shared<Payload>();
        pay->id = ++payload_seq_;
        pay->type = Payload::Type::txn;
        pay->wire_bytes = cfg_.txn_bytes;
        pay->verify_k = 1;
        pay->txn = ledger::make_transaction(std::move(body), now_);
        // Transactions ride a background gossip; model it as direct fan-out
        // with per-receiver latency, billed to the origin.
        for (std::uint32_t j = 0; j < cfg_.n_players; ++j) {
            if (j == origin) {
                schedule(now_, Ev::deliver, j, 0, pay, origin);
                continue;
            }
            peers_[origin].bytes_sent += cfg_.txn_bytes;
            std::int64_t lat =
                static_cast<std::int64_t>(net_rng_.exponential(cfg_.latency_mean_ms) * 1000.0);
            schedule(now_ + lat, Ev::deliver, j, 0, pay, origin);
        }
        schedule(now_ + next_txn_gap(), Ev::txn_submit, 0, 0);
    }

    void dispatch_event(Event& ev) {
        switch (ev.kind) {
            case Ev::round_start: ev_round_start(ev.player, ev.round); break;
            case Ev::stage2_start: ev_stage2_start(ev.player, ev.round); break;
            case Ev::round_end: ev_round_end(ev.player, ev.round); break;
            case Ev::step: ev_step(ev.player, ev.round); break;
            case Ev::resend: ev_resend(ev.player, ev.round); break;
            case Ev::proc_begin: ev_proc_begin(ev.player); break;
            case Ev::proc_exec: ev_proc_exec(ev.player); break;
            case Ev::deliver: ev_deliver(ev.player, std::move(ev.payload), ev.from); break;
            case Ev::txn_submit: ev_txn_submit(); break;
            case Ev::attack_flush: ev_attack_flush(ev.t); break;
        }
    }

    // ---- state ------------------------------------------------------------------

    ScenarioConfig cfg_;
    sigagg::SigScheme scheme_;
    Hash256 genesis_q_;
    Rng master_rng_;
    Rng offsets_rng_;
    Rng net_rng_;
    Rng workload_rng_;
    trace::TraceWriter writer_;
    RecordSink sink_;

    std::int64_t t1_us_ = 0, t2_us_ = 0, t_us_ = 0, step_us_ = 0;
    std::int64_t delta_t_us_ = 0, gst_us_ = 0, backoff_unit_us_ = 0, end_time_ = 0;
    std::size_t msig_bytes_ = 0;

    std::vector<Peer> peers_;
    std::priority_queue<Event, std::vector<Event>, EventLater> queue_;
    std::uint64_t seq_ = 0;
    std::int64_t now_ = 0;

    std::vector<ActiveAttack> attacks_;
    std::vector<std::uint32_t> prev_proposers_;
    std::unordered_map<const PrMessage*, PayloadPtr> pr_payloads_;
    std::uint64_t payload_seq_ = 0;

    std::uint64_t cur_round_ = 0;
    std::unordered_map<std::uint64_t, std::uint32_t> round_starts_;
    std::unordered_map<std::uint64_t, std::uint32_t> round_ends_;
    std::int64_t round_min_start_ = 0;
    std::uint32_t round_commit_count_ = 0;
    std::optional<std::int64_t> stage1_done_;
    std::optional<std::int64_t> stage2_done_;
    bool round_quiet_ = false;
    std::unordered_set<std::uint64_t> issued_prs_;
    std::uint32_t issued_count_ = 0;
    std::uint32_t stage1_complete_players_ = 0;
    std::unordered_set<std::uint32_t> stage1_live_;
    std::unordered_set<std::uint32_t> stage2_live_;
    std::unordered_set<std::uint32_t> round_committed_;

    std::uint64_t total_commits_ = 0;
};

}  // namespace

RunResult run_scenario(const scenario::ScenarioConfig& cfg, const RunOptions& opts) {
    cfg.validate();
    Simulation sim(cfg, opts);
    return sim.run();
}

}  // namespace gosig::simnet
