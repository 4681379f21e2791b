// Aggregatable multi-signatures with per-player counter arrays, plus the
// cryptographic sortition primitives (leader scores, Q-value chain).
//
// The scheme is a transparent stand-in for pairing-based multi-signatures:
// each player's atomic signature over a message is a keyed digest
// H(secret || public || message-digest), and the aggregate tag is a hash over
// the sorted multiset of keyed digests with their multiplicities.  The
// SigScheme object holds every player's key material and acts as the
// verification oracle: tags are recomputable from (message, counters), which
// preserves the algebraic contract the protocol needs (order-independent
// aggregation, k-signed checks, tamper rejection) without real pairings.
// Cost of real crypto is injected separately by the network cost model.
#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "gosig/hash.hpp"

namespace gosig::sigagg {

struct KeyPair {
    std::uint32_t index = 0;
    Hash256 secret{};
    Hash256 public_key{};
};

struct MultiSignature {
    Hash256 tag{};
    std::vector<std::uint32_t> counters;
    Hash256 message_digest{};

    std::size_t signer_count() const {
        std::size_t k = 0;
        for (auto c : counters)
            if (c > 0) ++k;
        return k;
    }
    bool has_signer(std::uint32_t i) const { return i < counters.size() && counters[i] > 0; }
    bool operator==(const MultiSignature&) const = default;
};

// A single player's signature over one message; used for leader proofs,
// seed signatures and proposal authentication.
struct AtomicSig {
    Hash256 value{};
    bool operator==(const AtomicSig&) const = default;
};

struct SortitionState {
    Hash256 q{};
    std::uint64_t height = 0;
    bool operator==(const SortitionState&) const = default;
};

struct LeaderProof {
    AtomicSig signature;
    double score = 1.0;
    std::uint64_t round = 0;

    bool operator==(const LeaderProof&) const = default;
};

KeyPair keygen(std::uint64_t seed, std::uint32_t index, std::uint32_t n_players);

// Potential-leader threshold q = q_numerator/N, capped at 1 for tiny groups.
double leader_threshold(std::uint32_t n_players, std::uint32_t q_numerator);

Hash256 leader_message_digest(std::uint64_t round, const Hash256& q);
Hash256 seed_message_digest(const Hash256& prev_q);

class SigScheme {
public:
    SigScheme(std::uint64_t seed, std::uint32_t n_players, std::uint32_t counter_bits = 32);

    std::uint32_t n_players() const { return n_; }
    std::uint32_t counter_bits() const { return counter_bits_; }
    std::uint64_t max_counter() const { return max_counter_; }
    const std::vector<Hash256>& public_keys() const { return publics_; }
    const KeyPair& key(std::uint32_t index) const;

    MultiSignature sign(const KeyPair& key, std::span<const std::uint8_t> message) const;
    MultiSignature sign_digest(const KeyPair& key, const Hash256& message_digest) const;

    // Tag recomputation consults the oracle's key table; commutativity and
    // associativity follow because the result depends only on the counter sum.
    MultiSignature aggregate(const MultiSignature& a, const MultiSignature& b) const;

    bool verify(const MultiSignature& sig, std::span<const std::uint8_t> message,
                std::span<const Hash256> pubkeys) const;
    bool verify_digest(const MultiSignature& sig, const Hash256& message_digest,
                       std::span<const Hash256> pubkeys) const;
    // Registry-keyed variant used on the simulation hot path.
    bool verify_digest(const MultiSignature& sig, const Hash256& message_digest) const;

    // Identity element for aggregation over the given message.
    MultiSignature zero(const Hash256& message_digest) const;

    // Expected tag for an arbitrary counter vector; this is the verification
    // relation itself (the scheme is transparent, not hiding).
    Hash256 tag_for(const Hash256& message_digest,
                    std::span<const std::uint32_t> counters) const;

    AtomicSig sign_atomic(const KeyPair& key, const Hash256& message_digest) const;
    bool verify_atomic(const AtomicSig& sig, std::uint32_t signer,
                       const Hash256& message_digest) const;

    LeaderProof leader_score(const KeyPair& key, std::uint64_t round,
                             const SortitionState& sortition) const;
    bool verify_leader_proof(const LeaderProof& proof, std::uint32_t player,
                             std::uint64_t round, const SortitionState& sortition,
                             double q) const;
    SortitionState next_q(const SortitionState& prev, std::uint32_t proposer,
                          const AtomicSig& seed_sig) const;

private:
    const std::vector<Hash256>& digest_row(const Hash256& message_digest) const;
    Hash256 signer_digest(std::uint32_t index, const Hash256& message_digest) const;

    std::uint32_t n_;
    std::uint32_t counter_bits_;
    std::uint64_t max_counter_;
    std::vector<KeyPair> keys_;
    std::vector<Hash256> publics_;

    struct RowHasher {
        std::size_t operator()(const Hash256& h) const {
            std::size_t v;
            std::memcpy(&v, h.data(), sizeof(v));
            return v;
        }
    };
    mutable std::mutex cache_mu_;
    mutable std::unordered_map<Hash256, std::unique_ptr<std::vector<Hash256>>, RowHasher> row_cache_;
};

// Counter-overflow guard from the gossip merge path: accept the element-wise
// sum iff max ≤ s or log2(max) < B·s/N, where max is the largest summed
// counter and s the distinct-signer count of the sum.  Reject is a normal
// outcome; the caller keeps its local signature.
bool guard_overflow(const MultiSignature& local, const MultiSignature& incoming,
                    std::uint32_t counter_bits, std::uint32_t n_players);

// Serialized footprint under a real-crypto size model (report arithmetic).
std::size_t encoded_size(std::size_t n_players, std::size_t sig_bits, std::size_t counter_bits);

// Wire layout: tag bytes followed by N little-endian counters of
// counter_bits/8 bytes each.
std::vector<std::uint8_t> serialize(const MultiSignature& sig, std::uint32_t counter_bits);
MultiSignature deserialize(std::span<const std::uint8_t> bytes, std::uint32_t n_players,
                           std::uint32_t counter_bits, const Hash256& message_digest);

double score_from_signature(const AtomicSig& sig);

}  // namespace gosig::sigagg
