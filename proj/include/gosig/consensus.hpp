// Per-player consensus state machine: leader selection, proposal assembly,
// Stage I relay, the Stage II vote/commit protocol, and recovery.
//
// Handlers are pure with respect to the network: each returns the messages
// and requests the player wants sent, and the caller (simulator or any other
// transport) decides delivery.  Every handler call processes exactly one
// event; a player instance is single-owner.
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "gosig/ledger.hpp"
#include "gosig/messages.hpp"
#include "gosig/rng.hpp"

namespace gosig::consensus {

// Block proposal bundle gossiped in Stage I.
struct PrMessage {
    // Current-round leader. Differs from block.proposer when a pending
    // tentatively-committed block is re-proposed by a later round's leader.
    std::uint32_t proposer = 0;
    ledger::Block block;
    ledger::ProposalCertificate cert;
    sigagg::LeaderProof leader_proof;
    // Proposer's signature over pr_digest; binds block, certificate and
    // leader proof together so relays cannot remix them.
    sigagg::AtomicSig proposer_sig;

    bool operator==(const PrMessage&) const = default;
};

Hash256 pr_digest(std::uint32_t proposer, const ledger::Block& block,
                  const ledger::ProposalCertificate& cert, const sigagg::LeaderProof& proof);

enum class Phase : std::uint8_t { init = 0, ped = 1, tced = 2, ced = 3 };

const char* phase_name(Phase p);

// ---- Decision function (pure) ---------------------------------------------
//
// The prepare decision runs once per round, at the Stage II boundary, over
// the proposals collected in Stage I.  It is a pure function of the tuple
// below so it can be tested against hand-worked cases directly.

struct ProposalView {
    Hash256 block_hash{};
    std::uint64_t height = 0;
    std::uint64_t r_p = 0;       // certified proposal round
    double leader_score = 1.0;   // proposer's score this round
};

struct DecideState {
    std::uint64_t h_root = 0;
    std::optional<Hash256> b_tc;  // nullopt = no tentatively-committed block
    std::uint64_t freshness = 0;  // F; 0 iff b_tc is empty
};

struct DecideOutcome {
    // Index into the proposal span of the block to prepare; nullopt stalls
    // the round (no vote).
    std::optional<std::size_t> chosen;
    // Drop the tentatively-committed block (state resets to <.., eps, 0>).
    bool reset_tc = false;
    // Adopt the chosen re-proposal's round as the new freshness F.  The
    // proposal message's certified round governs, not the locally remembered
    // one; they differ when the re-proposer tentatively committed later than
    // we did.
    std::optional<std::uint64_t> adopted_freshness;
};

// Prefers the largest certified proposal round; among those, the proposer
// with the smallest leader score wins, and a score tie (equivocating leader)
// falls back to the smaller block hash.  Only proposals at height h_root+1
// are eligible.
DecideOutcome decide_p_msg(const DecideState& st, std::span<const ProposalView> s);

// ---- Player ----------------------------------------------------------------

struct PlayerConfig {
    std::uint32_t n = 0;
    std::uint32_t f = 0;
    double q_threshold = 0.0;  // potential-leader cutoff for scores
    std::size_t max_block_txns = 1u << 14;
    // Whether this player exercises winning sortition tickets.  Abstaining is
    // always allowed (a silent leader looks like a crashed one); validation
    // of received proposals is unaffected.
    bool propose = true;
};

struct BlockRequest {
    Hash256 block_hash{};
    std::uint32_t target = 0;  // a signer of the evidence we hold
};

struct ChainRequest {
    std::uint64_t from_height = 0;
    std::uint32_t target = 0;
};

// Everything a handler wants put on the wire or fetched.
struct HandlerOutput {
    std::vector<PMessage> p_msgs;
    std::vector<TcMessage> tc_msgs;
    std::vector<std::shared_ptr<const PrMessage>> relays;
    std::vector<BlockRequest> block_requests;
    std::vector<ChainRequest> chain_requests;
    std::uint32_t commits = 0;  // heights committed while handling this event
};

// One state transition, for trace emission.
struct Transition {
    std::uint32_t player = 0;
    std::uint64_t round = 0;
    const char* event = "";
    Phase before = Phase::init;
    Phase after = Phase::init;
    Hash256 block_hash{};
    std::uint32_t signers = 0;
};
using TransitionSink = std::function<void(const Transition&)>;

class Player {
public:
    Player(const sigagg::SigScheme& scheme, sigagg::KeyPair key, PlayerConfig cfg,
           ledger::ChainReplica chain, std::uint64_t rng_seed);

    std::uint32_t index() const { return key_.index; }
    std::uint64_t round() const { return round_; }
    Phase phase() const { return phase_; }
    const ledger::ChainReplica& chain() const { return chain_; }
    std::uint64_t h_root() const { return chain_.height(); }
    const std::optional<ledger::Block>& b_tc() const { return b_tc_; }
    std::uint64_t freshness() const { return freshness_; }
    const std::optional<ledger::Block>& b_bar() const { return b_bar_; }
    std::size_t proposal_count() const { return proposals_.size(); }
    const sigagg::MultiSignature* p_aggregate() const;
    const sigagg::MultiSignature* tc_aggregate() const;

    void set_sink(TransitionSink sink) { sink_ = std::move(sink); }

    // Round lifecycle.  Returns the player's own proposal when it holds a
    // winning sortition ticket.
    std::optional<PrMessage> on_round_start(std::uint64_t round,
                                            std::span<const ledger::Transaction> pool);
    HandlerOutput on_stage1_message(const std::shared_ptr<const PrMessage>& pr);
    // Runs the prepare decision over the Stage I proposals; emits the
    // player's own P message unless the round stalls.
    HandlerOutput on_stage2_start();
    HandlerOutput on_p_message(const PMessage& msg);
    HandlerOutput on_tc_message(const TcMessage& msg);
    void on_round_end();

    // ---- recovery ----------------------------------------------------------
    std::optional<ledger::Block> serve_block(const Hash256& block_hash) const;
    std::vector<std::uint8_t> serve_chain(std::uint64_t from_height) const;
    HandlerOutput on_block_response(const ledger::Block& block);
    HandlerOutput on_chain_response(std::span<const std::uint8_t> bytes);

private:
    struct Proposal {
        std::shared_ptr<const PrMessage> pr;
        std::uint64_t r_p = 0;
        double leader_score = 1.0;
    };

    bool validate_pr(const PrMessage& pr, std::uint64_t* r_p_out) const;
    std::optional<PrMessage> build_proposal(const sigagg::LeaderProof& proof,
                                            std::span<const ledger::Transaction> pool);
    void become_tced(const sigagg::MultiSignature& p_proof, HandlerOutput& out);
    void commit_block(const ledger::Block& block, const TcMessage& evidence, HandlerOutput& out);
    // Certificate-grade TC evidence outside the normal handler path: commit
    // directly if the block is at hand, otherwise fetch it from a signer.
    void try_certificate_commit(const TcMessage& msg, HandlerOutput& out);
    const ledger::Block* find_block(const Hash256& block_hash) const;
    std::uint32_t pick_signer(const sigagg::MultiSignature& sig,
                              std::span<const std::uint32_t> exclude);
    std::uint32_t pick_peer();
    void emit(const char* event, Phase before, const Hash256& block_hash, std::uint32_t signers);

    const sigagg::SigScheme& scheme_;
    sigagg::KeyPair key_;
    PlayerConfig cfg_;
    ledger::ChainReplica chain_;
    Rng rng_;
    TransitionSink sink_;

    std::uint64_t round_ = 0;
    bool stage2_ = false;
    Phase phase_ = Phase::init;

    std::optional<ledger::Block> b_tc_;
    std::uint64_t freshness_ = 0;
    // Certificate backing a future re-proposal of b_tc_: the player's own TC
    // message from the round it tentatively committed.
    std::optional<TcMessage> c_tc_;

    std::optional<ledger::Block> b_bar_;
    std::optional<sigagg::MultiSignature> x_p_;
    std::optional<sigagg::MultiSignature> x_tc_;
    std::optional<sigagg::MultiSignature> tc_proof_;  // (2f+1) P proof for b_bar_

    std::vector<Proposal> proposals_;  // S
    std::unordered_map<Hash256, bool, ledger::Hash256Hasher> seen_prs_;  // by pr_digest

    struct PendingFetch {
        Hash256 block_hash{};
        TcMessage evidence;
        std::vector<std::uint32_t> tried;
    };
    std::optional<PendingFetch> pending_fetch_;
    std::uint64_t recovery_target_ = 0;  // chain height we believe exists
    std::vector<std::uint32_t> recovery_tried_;
};

}  // namespace gosig::consensus
