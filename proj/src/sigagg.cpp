#include "gosig/sigagg.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace gosig::sigagg {

namespace {

Hash256 derive_signer_digest(const Hash256& secret, const Hash256& pub, const Hash256& md) {
    return HashWriter{}.str("gosig.sd").hash(secret).hash(pub).hash(md).finish();
}

}  // namespace

KeyPair keygen(std::uint64_t seed, std::uint32_t index, std::uint32_t n_players) {
    if (index >= n_players) throw std::out_of_range("keygen: index out of range");
    KeyPair kp;
    kp.index = index;
    kp.secret = HashWriter{}.str("gosig.sk").u64(seed).u32(index).u32(n_players).finish();
    kp.public_key = HashWriter{}.str("gosig.pk").hash(kp.secret).finish();
    return kp;
}

double leader_threshold(std::uint32_t n_players, std::uint32_t q_numerator) {
    double q = static_cast<double>(q_numerator) / static_cast<double>(n_players);
    return q > 1.0 ? 1.0 : q;
}

Hash256 leader_message_digest(std::uint64_t round, const Hash256& q) {
    return HashWriter{}.str("gosig.lead").u64(round).hash(q).finish();
}

Hash256 seed_message_digest(const Hash256& prev_q) {
    return HashWriter{}.str("gosig.seed").hash(prev_q).finish();
}

SigScheme::SigScheme(std::uint64_t seed, std::uint32_t n_players, std::uint32_t counter_bits)
    : n_(n_players), counter_bits_(counter_bits) {
    if (n_players == 0) throw std::invalid_argument("SigScheme: empty group");
    if (counter_bits == 0 || counter_bits > 32 || counter_bits % 8 != 0)
        throw std::invalid_argument("SigScheme: counter width must be 8, 16, 24 or 32 bits");
    max_counter_ = (counter_bits == 32) ? 0xffffffffULL : ((1ULL << counter_bits) - 1);
    keys_.reserve(n_players);
    publics_.reserve(n_players);
    for (std::uint32_t i = 0; i < n_players; ++i) {
        keys_.push_back(keygen(seed, i, n_players));
        publics_.push_back(keys_.back().public_key);
    }
}

const KeyPair& SigScheme::key(std::uint32_t index) const {
    if (index >= n_) throw std::out_of_range("SigScheme::key");
    return keys_[index];
}

Hash256 SigScheme::signer_digest(std::uint32_t index, const Hash256& md) const {
    const KeyPair& kp = keys_[index];
    return derive_signer_digest(kp.secret, kp.public_key, md);
}

const std::vector<Hash256>& SigScheme::digest_row(const Hash256& md) const {
    std::lock_guard<std::mutex> lock(cache_mu_);
    auto it = row_cache_.find(md);
    if (it == row_cache_.end()) {
        auto row = std::make_unique<std::vector<Hash256>>();
        row->reserve(n_);
        for (std::uint32_t i = 0; i < n_; ++i) row->push_back(signer_digest(i, md));
        it = row_cache_.emplace(md, std::move(row)).first;
        if (row_cache_.size() > 4096) {
            // Rounds retire digests quickly; bound the cache by dropping it.
            auto keep = std::move(it->second);
            Hash256 key = it->first;
            row_cache_.clear();
            it = row_cache_.emplace(key, std::move(keep)).first;
        }
    }
    return *it->second;
}

Hash256 SigScheme::tag_for(const Hash256& md, std::span<const std::uint32_t> counters) const {
    if (counters.size() != n_) throw std::invalid_argument("tag_for: counter length mismatch");
    const auto& row = digest_row(md);
    // Canonical encoding of the digest multiset: distinct keyed digests in
    // lexicographic order, each followed by its multiplicity.
    std::vector<std::uint32_t> signers;
    signers.reserve(16);
    for (std::uint32_t i = 0; i < n_; ++i)
        if (counters[i] > 0) signers.push_back(i);
    std::sort(signers.begin(), signers.end(), [&](std::uint32_t a, std::uint32_t b) {
        return std::memcmp(row[a].data(), row[b].data(), 32) < 0;
    });
    std::vector<std::uint8_t> buf;
    buf.reserve(10 + signers.size() * 40);
    const char* domain = "gosig.tag";
    buf.insert(buf.end(), domain, domain + 9);
    for (std::uint32_t i : signers) {
        buf.insert(buf.end(), row[i].begin(), row[i].end());
        std::uint64_t m = counters[i];
        for (int b = 0; b < 8; ++b) buf.push_back(static_cast<std::uint8_t>(m >> (8 * b)));
    }
    return sha256(std::span<const std::uint8_t>(buf));
}

MultiSignature SigScheme::sign_digest(const KeyPair& key, const Hash256& md) const {
    if (key.index >= n_) throw std::out_of_range("sign: key index out of range");
    MultiSignature sig;
    sig.message_digest = md;
    sig.counters.assign(n_, 0);
    sig.counters[key.index] = 1;
    sig.tag = tag_for(md, sig.counters);
    return sig;
}

MultiSignature SigScheme::sign(const KeyPair& key, std::span<const std::uint8_t> message) const {
    return sign_digest(key, sha256(message));
}

MultiSignature SigScheme::aggregate(const MultiSignature& a, const MultiSignature& b) const {
    if (a.message_digest != b.message_digest)
        throw std::invalid_argument("aggregate: message digest mismatch");
    if (a.counters.size() != n_ || b.counters.size() != n_)
        throw std::invalid_argument("aggregate: counter length mismatch");
    MultiSignature out;
    out.message_digest = a.message_digest;
    out.counters.resize(n_);
    for (std::uint32_t i = 0; i < n_; ++i) {
        std::uint64_t sum = static_cast<std::uint64_t>(a.counters[i]) + b.counters[i];
        if (sum > max_counter_) throw std::overflow_error("aggregate: counter overflow");
        out.counters[i] = static_cast<std::uint32_t>(sum);
    }
    out.tag = tag_for(out.message_digest, out.counters);
    return out;
}

bool SigScheme::verify_digest(const MultiSignature& sig, const Hash256& md,
                              std::span<const Hash256> pubkeys) const {
    if (pubkeys.size() != sig.counters.size())
        throw std::invalid_argument("verify: pubkey/counter length mismatch");
    if (sig.counters.size() != n_) return false;
    if (sig.message_digest != md) return false;
    for (std::uint32_t i = 0; i < n_; ++i)
        if (sig.counters[i] > 0 && pubkeys[i] != publics_[i]) return false;
    return sig.tag == tag_for(md, sig.counters);
}

bool SigScheme::verify_digest(const MultiSignature& sig, const Hash256& md) const {
    return verify_digest(sig, md, publics_);
}

bool SigScheme::verify(const MultiSignature& sig, std::span<const std::uint8_t> message,
                       std::span<const Hash256> pubkeys) const {
    return verify_digest(sig, sha256(message), pubkeys);
}

MultiSignature SigScheme::zero(const Hash256& md) const {
    MultiSignature sig;
    sig.message_digest = md;
    sig.counters.assign(n_, 0);
    sig.tag = tag_for(md, sig.counters);
    return sig;
}

AtomicSig SigScheme::sign_atomic(const KeyPair& key, const Hash256& md) const {
    if (key.index >= n_) throw std::out_of_range("sign_atomic: key index out of range");
    return AtomicSig{derive_signer_digest(key.secret, key.public_key, md)};
}

bool SigScheme::verify_atomic(const AtomicSig& sig, std::uint32_t signer,
                              const Hash256& md) const {
    if (signer >= n_) return false;
    return sig.value == digest_row(md)[signer];
}

double score_from_signature(const AtomicSig& sig) {
    return hash_fraction(sha256(std::span<const std::uint8_t>(sig.value.data(), sig.value.size())));
}

LeaderProof SigScheme::leader_score(const KeyPair& key, std::uint64_t round,
                                    const SortitionState& sortition) const {
    LeaderProof proof;
    proof.round = round;
    proof.signature = sign_atomic(key, leader_message_digest(round, sortition.q));
    proof.score = score_from_signature(proof.signature);
    return proof;
}

bool SigScheme::verify_leader_proof(const LeaderProof& proof, std::uint32_t player,
                                    std::uint64_t round, const SortitionState& sortition,
                                    double q) const {
    if (proof.round != round) return false;
    if (!verify_atomic(proof.signature, player, leader_message_digest(round, sortition.q)))
        return false;
    return score_from_signature(proof.signature) < q;
}

SortitionState SigScheme::next_q(const SortitionState& prev, std::uint32_t proposer,
                                 const AtomicSig& seed_sig) const {
    if (!verify_atomic(seed_sig, proposer, seed_message_digest(prev.q)))
        throw std::invalid_argument("next_q: invalid proposer signature over Q");
    SortitionState next;
    next.q = sha256(std::span<const std::uint8_t>(seed_sig.value.data(), seed_sig.value.size()));
    next.height = prev.height + 1;
    return next;
}

bool guard_overflow(const MultiSignature& local, const MultiSignature& incoming,
                    std::uint32_t counter_bits, std::uint32_t n_players) {
    std::uint64_t max = 0;
    std::uint32_t s = 0;
    for (std::size_t i = 0; i < local.counters.size(); ++i) {
        std::uint64_t sum = static_cast<std::uint64_t>(local.counters[i]) + incoming.counters[i];
        if (sum > 0) ++s;
        if (sum > max) max = sum;
    }
    if (max <= s) return true;
    return std::log2(static_cast<double>(max)) <
           static_cast<double>(counter_bits) * s / n_players;
}

std::size_t encoded_size(std::size_t n_players, std::size_t sig_bits, std::size_t counter_bits) {
    return sig_bits / 8 + n_players * (counter_bits / 8);
}

std::vector<std::uint8_t> serialize(const MultiSignature& sig, std::uint32_t counter_bits) {
    if (counter_bits == 0 || counter_bits > 32 || counter_bits % 8 != 0)
        throw std::invalid_argument("serialize: bad counter width");
    std::size_t w = counter_bits / 8;
    std::uint64_t cap = (counter_bits == 32) ? 0xffffffffULL : ((1ULL << counter_bits) - 1);
    std::vector<std::uint8_t> out;
    out.reserve(32 + sig.counters.size() * w);
    out.insert(out.end(), sig.tag.begin(), sig.tag.end());
    for (std::uint32_t c : sig.counters) {
        if (c > cap) throw std::overflow_error("serialize: counter exceeds width");
        for (std::size_t b = 0; b < w; ++b) out.push_back(static_cast<std::uint8_t>(c >> (8 * b)));
    }
    return out;
}

MultiSignature deserialize(std::span<const std::uint8_t> bytes, std::uint32_t n_players,
                           std::uint32_t counter_bits, const Hash256& message_digest) {
    std::size_t w = counter_bits / 8;
    if (bytes.size() != 32 + static_cast<std::size_t>(n_players) * w)
        throw std::invalid_argument("deserialize: length mismatch");
    MultiSignature sig;
    sig.message_digest = message_digest;
    std::copy(bytes.begin(), bytes.begin() + 32, sig.tag.begin());
    sig.counters.resize(n_players);
    for (std::uint32_t i = 0; i < n_players; ++i) {
        std::uint32_t c = 0;
        for (std::size_t b = 0; b < w; ++b)
            c |= static_cast<std::uint32_t>(bytes[32 + i * w + b]) << (8 * b);
        sig.counters[i] = c;
    }
    return sig;
}

}  // namespace gosig::sigagg
