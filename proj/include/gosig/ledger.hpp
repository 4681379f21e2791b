// Blocks, transactions, certificates and chain replicas.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gosig/hash.hpp"
#include "gosig/messages.hpp"
#include "gosig/sigagg.hpp"

namespace gosig::ledger {

struct Transaction {
    Hash256 id{};
    std::vector<std::uint8_t> payload;
    std::int64_t submit_time_us = 0;
};

Transaction make_transaction(std::vector<std::uint8_t> payload, std::int64_t submit_time_us);

struct Block {
    std::uint64_t height = 0;
    Hash256 prev_hash{};
    std::uint32_t proposer = 0;
    std::uint64_t proposal_round_origin = 0;
    std::vector<Hash256> txn_hashes;
    // Proposer's signature over the parent-height Q value.  Committing this
    // block advances the sortition seed with it (Q^h = H(SIG(Q^{h-1}))), and
    // persisting it in the header keeps dumped chains verifiable offline.
    sigagg::AtomicSig seed_sig;
    Hash256 block_hash{};

    bool operator==(const Block&) const = default;
};

Hash256 compute_block_hash(const Block& b);

struct Hash256Hasher {
    std::size_t operator()(const Hash256& h) const {
        std::size_t v;
        std::memcpy(&v, h.data(), sizeof(v));
        return v;
    }
};
using TxnSet = std::unordered_set<Hash256, Hash256Hasher>;

struct ProposalCertificate {
    enum class Kind : std::uint8_t { genesis = 0, case1 = 1, case2 = 2 };
    Kind kind = Kind::genesis;
    std::optional<consensus::TcMessage> tc;

    // The proposal round this certificate grants (unchecked; validation is
    // validate_proposal_certificate's job).
    std::uint64_t certified_round() const {
        switch (kind) {
            case Kind::genesis: return 1;
            case Kind::case1: return tc ? tc->round : 0;
            case Kind::case2: return tc ? tc->round + 1 : 0;
        }
        return 0;
    }
    Hash256 digest() const;
    bool operator==(const ProposalCertificate&) const = default;
};

struct CommitmentCertificate {
    consensus::TcMessage tc;
    std::uint64_t round() const { return tc.round; }
};

Block make_block(const Block* parent, std::span<const Transaction> txns, std::uint32_t proposer,
                 std::uint64_t round, const sigagg::AtomicSig& seed_sig,
                 std::size_t max_block_txns, const TxnSet& committed);

bool validate_block(const Block& b, const Block* parent, const TxnSet& committed);

// Returns the proposal round r_p, or nullopt when the certificate is invalid
// for (b, h) proposed by `proposer` at current round r. `proposer` is the
// player gossiping the proposal, which on a re-proposal is not b.proposer.
std::optional<std::uint64_t> validate_proposal_certificate(const sigagg::SigScheme& scheme,
                                                           const ProposalCertificate& cert,
                                                           const Block& b, std::uint32_t proposer,
                                                           std::uint64_t h, std::uint64_t r,
                                                           std::uint32_t f);

bool validate_commitment_certificate(const sigagg::SigScheme& scheme, std::uint32_t f,
                                     const CommitmentCertificate& cert,
                                     const Hash256& block_hash, std::uint64_t height);

struct ChainEntry {
    Block block;
    CommitmentCertificate cert;
};

class ChainReplica {
public:
    explicit ChainReplica(const Hash256& genesis_q);

    std::uint64_t height() const { return entries_.size(); }
    const Block* head() const { return entries_.empty() ? nullptr : &entries_.back().block; }
    Hash256 head_hash() const { return entries_.empty() ? zero_hash : entries_.back().block.block_hash; }
    const Block* block_at(std::uint64_t h) const;
    const Block* block_by_hash(const Hash256& block_hash) const;
    const CommitmentCertificate* cert_at(std::uint64_t h) const;
    const Hash256& q_at(std::uint64_t h) const;
    sigagg::SortitionState sortition() const;
    bool txn_committed(const Hash256& id) const { return spent_.count(id) > 0; }
    const TxnSet& committed_txns() const { return spent_; }

    // Validates the extension (hash link, certificate threshold, seed
    // signature) and appends.  Re-committing the head block is a no-op.
    void commit(const sigagg::SigScheme& scheme, std::uint32_t f, const Block& b,
                const CommitmentCertificate& cert);

    std::vector<std::uint8_t> dump(std::uint32_t counter_bits) const;
    std::vector<std::uint8_t> dump_from(std::uint64_t first_height, std::uint32_t counter_bits) const;
    static std::vector<ChainEntry> parse_entries(std::span<const std::uint8_t> bytes,
                                                 std::uint32_t n_players,
                                                 std::uint32_t counter_bits);
    static ChainReplica load(const sigagg::SigScheme& scheme, std::uint32_t f,
                             const Hash256& genesis_q, std::span<const std::uint8_t> bytes);

private:
    std::vector<ChainEntry> entries_;
    std::vector<Hash256> q_history_;  // q_history_[h] = Q^h, [0] = genesis
    TxnSet spent_;
    std::unordered_map<Hash256, std::uint64_t, Hash256Hasher> by_hash_;
};

}  // namespace gosig::ledger
