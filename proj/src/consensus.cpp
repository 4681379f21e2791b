#include "gosig/consensus.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace gosig::consensus {

Hash256 pr_digest(std::uint32_t proposer, const ledger::Block& block,
                  const ledger::ProposalCertificate& cert, const sigagg::LeaderProof& proof) {
    return HashWriter{}
        .str("gosig.PR")
        .u64(proposer)
        .hash(block.block_hash)
        .u64(block.height)
        .hash(cert.digest())
        .hash(proof.signature.value)
        .u64(proof.round)
        .finish();
}

const char* phase_name(Phase p) {
    switch (p) {
        case Phase::init: return "init";
        case Phase::ped: return "ped";
        case Phase::tced: return "tced";
        case Phase::ced: return "ced";
    }
    return "?";
}

DecideOutcome decide_p_msg(const DecideState& st, std::span<const ProposalView> s) {
    DecideOutcome out;
    if (s.empty()) return out;

    std::uint64_t best_rp = 0;
    for (const auto& p : s) best_rp = std::max(best_rp, p.r_p);
    std::size_t bar = s.size();
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i].r_p != best_rp) continue;
        if (bar == s.size()) {
            bar = i;
            continue;
        }
        const auto& a = s[i];
        const auto& b = s[bar];
        if (a.leader_score < b.leader_score ||
            (a.leader_score == b.leader_score &&
             std::memcmp(a.block_hash.data(), b.block_hash.data(), a.block_hash.size()) < 0))
            bar = i;
    }

    if (s[bar].height != st.h_root + 1) return out;

    if (!st.b_tc) {
        out.chosen = bar;
        out.reset_tc = true;
        return out;
    }
    if (s[bar].r_p > st.freshness) {
        out.chosen = bar;
        out.reset_tc = true;
        return out;
    }
    // A re-proposal of the pending block that is not older than F keeps it
    // alive; adopt the certified round of the best such message.
    std::size_t re = s.size();
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto& p = s[i];
        if (p.block_hash != *st.b_tc || p.height != st.h_root + 1 || p.r_p < st.freshness)
            continue;
        if (re == s.size() || p.r_p > s[re].r_p ||
            (p.r_p == s[re].r_p && p.leader_score < s[re].leader_score))
            re = i;
    }
    if (re != s.size()) {
        out.chosen = re;
        out.adopted_freshness = s[re].r_p;
    }
    return out;
}

Player::Player(const sigagg::SigScheme& scheme, sigagg::KeyPair key, PlayerConfig cfg,
               ledger::ChainReplica chain, std::uint64_t rng_seed)
    : scheme_(scheme),
      key_(std::move(key)),
      cfg_(cfg),
      chain_(std::move(chain)),
      rng_(rng_seed) {}

const sigagg::MultiSignature* Player::p_aggregate() const { return x_p_ ? &*x_p_ : nullptr; }
const sigagg::MultiSignature* Player::tc_aggregate() const { return x_tc_ ? &*x_tc_ : nullptr; }

void Player::emit(const char* event, Phase before, const Hash256& block_hash,
                  std::uint32_t signers) {
    if (!sink_) return;
    sink_(Transition{key_.index, round_, event, before, phase_, block_hash, signers});
}

std::optional<PrMessage> Player::on_round_start(std::uint64_t round,
                                                std::span<const ledger::Transaction> pool) {
    round_ = round;
    stage2_ = false;
    Phase before = phase_;
    phase_ = Phase::init;
    b_bar_.reset();
    x_p_.reset();
    x_tc_.reset();
    tc_proof_.reset();
    proposals_.clear();
    seen_prs_.clear();
    emit("round_start", before, zero_hash, 0);

    if (!cfg_.propose) return std::nullopt;
    auto proof = scheme_.leader_score(key_, round, chain_.sortition());
    if (!(proof.score < cfg_.q_threshold)) return std::nullopt;
    return build_proposal(proof, pool);
}

std::optional<PrMessage> Player::build_proposal(const sigagg::LeaderProof& proof,
                                                std::span<const ledger::Transaction> pool) {
    const std::uint64_t h = chain_.height() + 1;

    ledger::ProposalCertificate fresh_cert;
    if (chain_.height() == 0) {
        fresh_cert.kind = ledger::ProposalCertificate::Kind::genesis;
    } else {
        fresh_cert.kind = ledger::ProposalCertificate::Kind::case2;
        fresh_cert.tc = chain_.cert_at(chain_.height())->tc;
    }

    PrMessage pr;
    // The pending tentatively-committed block wins whenever its certified
    // round is at least as large as what a fresh block would carry.
    if (b_tc_ && c_tc_ && b_tc_->height == h &&
        c_tc_->round >= fresh_cert.certified_round()) {
        pr.block = *b_tc_;
        pr.cert = {ledger::ProposalCertificate::Kind::case1, *c_tc_};
    } else {
        std::vector<ledger::Transaction> txns;
        for (const auto& t : pool) {
            if (txns.size() >= cfg_.max_block_txns) break;
            if (chain_.txn_committed(t.id)) continue;
            txns.push_back(t);
        }
        auto seed = scheme_.sign_atomic(key_, sigagg::seed_message_digest(chain_.sortition().q));
        pr.block = ledger::make_block(chain_.head(), txns, key_.index, round_, seed,
                                      cfg_.max_block_txns, chain_.committed_txns());
        pr.cert = std::move(fresh_cert);
    }
    pr.proposer = key_.index;
    pr.leader_proof = proof;
    pr.proposer_sig =
        scheme_.sign_atomic(key_, pr_digest(pr.proposer, pr.block, pr.cert, pr.leader_proof));

    // Own proposals join S directly; the gossip echo is deduplicated away.
    auto shared = std::make_shared<const PrMessage>(pr);
    seen_prs_.emplace(pr_digest(pr.proposer, pr.block, pr.cert, pr.leader_proof), true);
    std::uint64_t r_p = 0;
    if (validate_pr(*shared, &r_p)) {
        proposals_.push_back({shared, r_p, proof.score});
        emit("propose", phase_, pr.block.block_hash, 0);
        return pr;
    }
    return std::nullopt;
}

bool Player::validate_pr(const PrMessage& pr, std::uint64_t* r_p_out) const {
    const ledger::Block& b = pr.block;
    if (pr.proposer >= cfg_.n || b.proposer >= cfg_.n) return false;
    const auto sortition = chain_.sortition();
    if (!scheme_.verify_leader_proof(pr.leader_proof, pr.proposer, round_, sortition,
                                     cfg_.q_threshold))
        return false;
    if (!scheme_.verify_atomic(pr.proposer_sig, pr.proposer,
                               pr_digest(pr.proposer, b, pr.cert, pr.leader_proof)))
        return false;
    if (!ledger::validate_block(b, chain_.head(), chain_.committed_txns())) return false;
    if (!scheme_.verify_atomic(b.seed_sig, b.proposer,
                               sigagg::seed_message_digest(sortition.q)))
        return false;
    auto r_p = ledger::validate_proposal_certificate(scheme_, pr.cert, b, pr.proposer, b.height,
                                                     round_, cfg_.f);
    if (!r_p) return false;
    *r_p_out = *r_p;
    return true;
}

HandlerOutput Player::on_stage1_message(const std::shared_ptr<const PrMessage>& pr) {
    HandlerOutput out;
    if (!pr) return out;
    const Hash256 digest = pr_digest(pr->proposer, pr->block, pr->cert, pr->leader_proof);
    if (!seen_prs_.emplace(digest, true).second) return out;

    const std::uint64_t h = pr->block.height;
    if (h > chain_.height() + 1) {
        // A case-2 certificate proves height h-1 committed somewhere; if that
        // is past our head we are behind and must catch up before voting.
        const auto& cert = pr->cert;
        if (cert.kind == ledger::ProposalCertificate::Kind::case2 && cert.tc &&
            cert.tc->height == h - 1 && cert.tc->height > chain_.height() &&
            cert.tc->height > recovery_target_ &&
            cert.tc->sig.signer_count() >= 2 * cfg_.f + 1 &&
            validate_tc_message(scheme_, cfg_.f, *cert.tc)) {
            recovery_target_ = cert.tc->height;
            const std::uint32_t target = pick_peer();
            recovery_tried_.assign(1, target);
            out.chain_requests.push_back({chain_.height() + 1, target});
            emit("behind", phase_, pr->block.block_hash, 0);
        }
        return out;
    }
    if (h != chain_.height() + 1) return out;

    std::uint64_t r_p = 0;
    if (!validate_pr(*pr, &r_p)) return out;

    if (!stage2_) {
        proposals_.push_back({pr, r_p, pr->leader_proof.score});
        emit("pr_accept", phase_, pr->block.block_hash, 0);
    }
    // Valid proposals are forwarded even after the stage boundary so slow
    // peers can still fetch them.
    out.relays.push_back(pr);
    return out;
}

HandlerOutput Player::on_stage2_start() {
    HandlerOutput out;
    stage2_ = true;

    // Per-round retries for outstanding recovery work.
    if (pending_fetch_) {
        if (pending_fetch_->evidence.height == chain_.height() + 1) {
            const std::uint32_t target =
                pick_signer(pending_fetch_->evidence.sig, pending_fetch_->tried);
            pending_fetch_->tried.push_back(target);
            out.block_requests.push_back({pending_fetch_->block_hash, target});
        } else {
            pending_fetch_.reset();
        }
    }
    if (recovery_target_ > chain_.height()) {
        const std::uint32_t target = pick_peer();
        recovery_tried_.push_back(target);
        out.chain_requests.push_back({chain_.height() + 1, target});
    }

    if (phase_ != Phase::init) return out;  // committed early via recovery

    std::vector<ProposalView> views;
    views.reserve(proposals_.size());
    for (const auto& p : proposals_)
        views.push_back({p.pr->block.block_hash, p.pr->block.height, p.r_p, p.leader_score});
    DecideState st{chain_.height(),
                   b_tc_ ? std::optional<Hash256>(b_tc_->block_hash) : std::nullopt, freshness_};
    auto outcome = decide_p_msg(st, views);
    if (outcome.reset_tc) {
        b_tc_.reset();
        freshness_ = 0;
        c_tc_.reset();
    }
    if (outcome.adopted_freshness) freshness_ = *outcome.adopted_freshness;
    if (!outcome.chosen) {
        emit("decide_null", phase_, zero_hash, 0);
        return out;
    }

    Phase before = phase_;
    b_bar_ = proposals_[*outcome.chosen].pr->block;
    phase_ = Phase::ped;
    x_p_ = scheme_.sign_digest(key_, p_digest(round_, b_bar_->height, b_bar_->block_hash));
    emit("prepare", before, b_bar_->block_hash, 1);
    out.p_msgs.push_back({round_, b_bar_->height, b_bar_->block_hash, *x_p_});
    return out;
}

HandlerOutput Player::on_p_message(const PMessage& msg) {
    HandlerOutput out;
    if (msg.round != round_) return out;
    if (phase_ != Phase::ped || !b_bar_ || msg.block_hash != b_bar_->block_hash ||
        msg.height != b_bar_->height)
        return out;
    if (!validate_p_message(scheme_, msg)) return out;
    if (!sigagg::guard_overflow(*x_p_, msg.sig, scheme_.counter_bits(), cfg_.n)) {
        emit("merge_reject", phase_, b_bar_->block_hash,
             static_cast<std::uint32_t>(x_p_->signer_count()));
        return out;
    }
    *x_p_ = scheme_.aggregate(*x_p_, msg.sig);
    const auto signers = static_cast<std::uint32_t>(x_p_->signer_count());
    if (signers >= 2 * cfg_.f + 1) {
        become_tced(*x_p_, out);
        out.tc_msgs.push_back({round_, b_bar_->height, b_bar_->block_hash, *x_tc_, *tc_proof_});
    } else {
        emit("p_merge", phase_, b_bar_->block_hash, signers);
        out.p_msgs.push_back({round_, b_bar_->height, b_bar_->block_hash, *x_p_});
    }
    return out;
}

void Player::become_tced(const sigagg::MultiSignature& p_proof, HandlerOutput&) {
    Phase before = phase_;
    phase_ = Phase::tced;
    b_tc_ = b_bar_;
    freshness_ = round_;
    tc_proof_ = p_proof;
    x_tc_ = scheme_.sign_digest(key_, tc_digest(round_, b_bar_->height, b_bar_->block_hash));
    c_tc_ = TcMessage{round_, b_bar_->height, b_bar_->block_hash, *x_tc_, p_proof};
    emit("tentative_commit", before, b_bar_->block_hash,
         static_cast<std::uint32_t>(p_proof.signer_count()));
}

HandlerOutput Player::on_tc_message(const TcMessage& msg) {
    HandlerOutput out;
    if (!validate_tc_message(scheme_, cfg_.f, msg)) return out;

    const bool matches_bar =
        b_bar_ && msg.block_hash == b_bar_->block_hash && msg.height == b_bar_->height;
    if (msg.round == round_ && phase_ != Phase::init && matches_bar) {
        if (phase_ == Phase::ped) become_tced(msg.p_proof, out);
        if (!sigagg::guard_overflow(*x_tc_, msg.sig, scheme_.counter_bits(), cfg_.n)) {
            emit("merge_reject", phase_, msg.block_hash,
                 static_cast<std::uint32_t>(x_tc_->signer_count()));
            return out;
        }
        *x_tc_ = scheme_.aggregate(*x_tc_, msg.sig);
        const auto signers = static_cast<std::uint32_t>(x_tc_->signer_count());
        if (phase_ != Phase::ced && signers >= 2 * cfg_.f + 1) {
            TcMessage evidence{round_, msg.height, msg.block_hash, *x_tc_, *tc_proof_};
            commit_block(*b_bar_, evidence, out);
        } else {
            emit("tc_merge", phase_, msg.block_hash, signers);
        }
        out.tc_msgs.push_back({round_, msg.height, msg.block_hash, *x_tc_, *tc_proof_});
        return out;
    }

    // Outside the in-round handler the message can still matter: a
    // (2f+1)-signed TC is a commitment certificate no matter when it arrives.
    try_certificate_commit(msg, out);
    return out;
}

void Player::commit_block(const ledger::Block& block, const TcMessage& evidence,
                          HandlerOutput& out) {
    Phase before = phase_;
    chain_.commit(scheme_, cfg_.f, block, ledger::CommitmentCertificate{evidence});
    b_tc_.reset();
    freshness_ = 0;
    c_tc_.reset();
    pending_fetch_.reset();
    // A commit mid-round ends our Stage II; during Stage I we keep collecting
    // proposals for the next height and vote normally.
    phase_ = stage2_ ? Phase::ced : Phase::init;
    ++out.commits;
    emit("commit", before, block.block_hash,
         static_cast<std::uint32_t>(evidence.sig.signer_count()));
}

void Player::try_certificate_commit(const TcMessage& msg, HandlerOutput& out) {
    if (msg.sig.signer_count() < 2 * cfg_.f + 1) return;
    if (msg.height != chain_.height() + 1) return;
    if (const ledger::Block* b = find_block(msg.block_hash)) {
        ledger::Block copy = *b;  // the pointer may alias state commit resets
        commit_block(copy, msg, out);
        return;
    }
    if (pending_fetch_ && pending_fetch_->block_hash == msg.block_hash) return;
    pending_fetch_ = PendingFetch{msg.block_hash, msg, {}};
    const std::uint32_t target = pick_signer(msg.sig, {});
    pending_fetch_->tried.push_back(target);
    out.block_requests.push_back({msg.block_hash, target});
    emit("fetch_block", phase_, msg.block_hash,
         static_cast<std::uint32_t>(msg.sig.signer_count()));
}

const ledger::Block* Player::find_block(const Hash256& block_hash) const {
    if (b_bar_ && b_bar_->block_hash == block_hash) return &*b_bar_;
    if (b_tc_ && b_tc_->block_hash == block_hash) return &*b_tc_;
    for (const auto& p : proposals_)
        if (p.pr->block.block_hash == block_hash) return &p.pr->block;
    return chain_.block_by_hash(block_hash);
}

std::uint32_t Player::pick_signer(const sigagg::MultiSignature& sig,
                                  std::span<const std::uint32_t> exclude) {
    std::vector<std::uint32_t> fresh;
    std::vector<std::uint32_t> any;
    for (std::uint32_t i = 0; i < sig.counters.size(); ++i) {
        if (sig.counters[i] == 0 || i == key_.index) continue;
        any.push_back(i);
        if (std::find(exclude.begin(), exclude.end(), i) == exclude.end()) fresh.push_back(i);
    }
    const auto& pool = fresh.empty() ? any : fresh;
    if (pool.empty()) return key_.index;
    return pool[rng_.below(pool.size())];
}

std::uint32_t Player::pick_peer() {
    if (cfg_.n <= 1) return key_.index;
    std::uint32_t t;
    do {
        t = static_cast<std::uint32_t>(rng_.below(cfg_.n));
    } while (t == key_.index);
    return t;
}

void Player::on_round_end() {
    emit("round_end", phase_, b_bar_ ? b_bar_->block_hash : zero_hash,
         x_tc_ ? static_cast<std::uint32_t>(x_tc_->signer_count())
               : (x_p_ ? static_cast<std::uint32_t>(x_p_->signer_count()) : 0));
    // B_root/B_tc/F persist; the per-round scratch resets at the next
    // on_round_start so post-round inspection still sees this round.
}

std::optional<ledger::Block> Player::serve_block(const Hash256& block_hash) const {
    const ledger::Block* b = find_block(block_hash);
    if (!b) return std::nullopt;
    return *b;
}

std::vector<std::uint8_t> Player::serve_chain(std::uint64_t from_height) const {
    return chain_.dump_from(from_height, scheme_.counter_bits());
}

HandlerOutput Player::on_block_response(const ledger::Block& block) {
    HandlerOutput out;
    if (!pending_fetch_) return out;
    if (pending_fetch_->evidence.height != chain_.height() + 1) {
        pending_fetch_.reset();
        return out;
    }
    if (block.block_hash != pending_fetch_->block_hash ||
        ledger::compute_block_hash(block) != block.block_hash ||
        !ledger::validate_block(block, chain_.head(), chain_.committed_txns())) {
        const std::uint32_t target =
            pick_signer(pending_fetch_->evidence.sig, pending_fetch_->tried);
        pending_fetch_->tried.push_back(target);
        out.block_requests.push_back({pending_fetch_->block_hash, target});
        return out;
    }
    const TcMessage evidence = pending_fetch_->evidence;
    pending_fetch_.reset();
    commit_block(block, evidence, out);
    return out;
}

HandlerOutput Player::on_chain_response(std::span<const std::uint8_t> bytes) {
    HandlerOutput out;
    std::vector<ledger::ChainEntry> entries;
    try {
        entries = ledger::ChainReplica::parse_entries(bytes, cfg_.n, scheme_.counter_bits());
    } catch (const std::exception&) {
        entries.clear();
    }
    for (const auto& e : entries) {
        if (e.block.height <= chain_.height()) continue;
        if (e.block.height != chain_.height() + 1) break;
        try {
            commit_block(e.block, e.cert.tc, out);
        } catch (const std::exception&) {
            break;  // keep the valid prefix, drop the rest of this response
        }
    }
    if (recovery_target_ > chain_.height()) {
        std::uint32_t target = pick_peer();
        for (int attempt = 0; attempt < 8; ++attempt) {
            if (std::find(recovery_tried_.begin(), recovery_tried_.end(), target) ==
                recovery_tried_.end())
                break;
            target = pick_peer();
        }
        recovery_tried_.push_back(target);
        out.chain_requests.push_back({chain_.height() + 1, target});
    } else {
        recovery_target_ = 0;
        recovery_tried_.clear();
    }
    return out;
}

}  // namespace gosig::consensus
