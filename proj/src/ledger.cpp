#include "gosig/ledger.hpp"

#include <algorithm>
#include <stdexcept>

namespace gosig::ledger {

using consensus::TcMessage;

Transaction make_transaction(std::vector<std::uint8_t> payload, std::int64_t submit_time_us) {
    Transaction t;
    t.id = HashWriter{}.str("gosig.txn").bytes(payload).finish();
    t.payload = std::move(payload);
    t.submit_time_us = submit_time_us;
    return t;
}

Hash256 compute_block_hash(const Block& b) {
    HashWriter w;
    w.str("gosig.block")
        .u64(b.height)
        .hash(b.prev_hash)
        .u32(b.proposer)
        .u64(b.proposal_round_origin)
        .hash(b.seed_sig.value)
        .u32(static_cast<std::uint32_t>(b.txn_hashes.size()));
    for (const auto& id : b.txn_hashes) w.hash(id);
    return w.finish();
}

Hash256 ProposalCertificate::digest() const {
    HashWriter w;
    w.str("gosig.cert").u32(static_cast<std::uint32_t>(kind));
    if (tc) {
        w.u64(tc->round).u64(tc->height).hash(tc->block_hash).hash(tc->sig.tag).hash(tc->p_proof.tag);
    }
    return w.finish();
}

Block make_block(const Block* parent, std::span<const Transaction> txns, std::uint32_t proposer,
                 std::uint64_t round, const sigagg::AtomicSig& seed_sig,
                 std::size_t max_block_txns, const TxnSet& committed) {
    if (txns.size() > max_block_txns) throw std::invalid_argument("make_block: budget exceeded");
    Block b;
    b.height = parent ? parent->height + 1 : 1;
    b.prev_hash = parent ? parent->block_hash : zero_hash;
    b.proposer = proposer;
    b.proposal_round_origin = round;
    b.seed_sig = seed_sig;
    TxnSet seen;
    for (const auto& t : txns) {
        if (committed.count(t.id) || !seen.insert(t.id).second)
            throw std::invalid_argument("make_block: invalid or duplicate transaction");
        b.txn_hashes.push_back(t.id);
    }
    b.block_hash = compute_block_hash(b);
    return b;
}

bool validate_block(const Block& b, const Block* parent, const TxnSet& committed) {
    if (parent) {
        if (b.height != parent->height + 1) return false;
        if (b.prev_hash != parent->block_hash) return false;
    } else {
        if (b.height != 1) return false;
        if (b.prev_hash != zero_hash) return false;
    }
    if (b.block_hash != compute_block_hash(b)) return false;
    TxnSet seen;
    for (const auto& id : b.txn_hashes) {
        if (committed.count(id) || !seen.insert(id).second) return false;
    }
    return true;
}

std::optional<std::uint64_t> validate_proposal_certificate(const sigagg::SigScheme& scheme,
                                                           const ProposalCertificate& cert,
                                                           const Block& b, std::uint32_t proposer,
                                                           std::uint64_t h, std::uint64_t r,
                                                           std::uint32_t f) {
    if (b.height != h) return std::nullopt;
    const std::uint32_t quorum = 2 * f + 1;
    switch (cert.kind) {
        case ProposalCertificate::Kind::genesis:
            if (h != 1 || cert.tc) return std::nullopt;
            return 1;
        case ProposalCertificate::Kind::case1: {
            if (!cert.tc) return std::nullopt;
            const TcMessage& tc = *cert.tc;
            if (tc.block_hash != b.block_hash || tc.height != h) return std::nullopt;
            if (tc.round >= r) return std::nullopt;
            if (!tc.sig.has_signer(proposer)) return std::nullopt;
            if (!consensus::validate_tc_message(scheme, f, tc)) return std::nullopt;
            return tc.round;
        }
        case ProposalCertificate::Kind::case2: {
            if (!cert.tc) return std::nullopt;
            const TcMessage& tc = *cert.tc;
            if (h < 2 || tc.block_hash != b.prev_hash || tc.height != h - 1) return std::nullopt;
            if (tc.round >= r) return std::nullopt;
            if (tc.sig.signer_count() < quorum) return std::nullopt;
            if (!consensus::validate_tc_message(scheme, f, tc)) return std::nullopt;
            return tc.round + 1;
        }
    }
    return std::nullopt;
}

bool validate_commitment_certificate(const sigagg::SigScheme& scheme, std::uint32_t f,
                                     const CommitmentCertificate& cert,
                                     const Hash256& block_hash, std::uint64_t height) {
    const TcMessage& tc = cert.tc;
    if (tc.block_hash != block_hash || tc.height != height) return false;
    if (tc.sig.signer_count() < 2 * f + 1) return false;
    return consensus::validate_tc_message(scheme, f, tc);
}

ChainReplica::ChainReplica(const Hash256& genesis_q) { q_history_.push_back(genesis_q); }

const Block* ChainReplica::block_at(std::uint64_t h) const {
    if (h == 0 || h > entries_.size()) return nullptr;
    return &entries_[h - 1].block;
}

const Block* ChainReplica::block_by_hash(const Hash256& block_hash) const {
    auto it = by_hash_.find(block_hash);
    return it == by_hash_.end() ? nullptr : block_at(it->second);
}

const CommitmentCertificate* ChainReplica::cert_at(std::uint64_t h) const {
    if (h == 0 || h > entries_.size()) return nullptr;
    return &entries_[h - 1].cert;
}

const Hash256& ChainReplica::q_at(std::uint64_t h) const {
    if (h >= q_history_.size()) throw std::out_of_range("q_at: height beyond head");
    return q_history_[h];
}

sigagg::SortitionState ChainReplica::sortition() const {
    return {q_history_.back(), entries_.size()};
}

void ChainReplica::commit(const sigagg::SigScheme& scheme, std::uint32_t f, const Block& b,
                          const CommitmentCertificate& cert) {
    if (b.height <= entries_.size()) {
        const Block* have = block_at(b.height);
        if (have && have->block_hash == b.block_hash) return;  // idempotent re-commit
        throw std::logic_error("commit: conflicting block at committed height");
    }
    if (b.height != entries_.size() + 1) throw std::invalid_argument("commit: height gap");
    if (!validate_block(b, head(), spent_)) throw std::invalid_argument("commit: invalid block");
    if (!validate_commitment_certificate(scheme, f, cert, b.block_hash, b.height))
        throw std::invalid_argument("commit: bad certificate");
    // Eq. 1: advance the per-height seed with the proposer's signature.
    sigagg::SortitionState next =
        scheme.next_q({q_history_.back(), entries_.size()}, b.proposer, b.seed_sig);
    for (const auto& id : b.txn_hashes) spent_.insert(id);
    q_history_.push_back(next.q);
    by_hash_.emplace(b.block_hash, b.height);
    entries_.push_back({b, cert});
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_hash(std::vector<std::uint8_t>& out, const Hash256& h) {
    out.insert(out.end(), h.begin(), h.end());
}

class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        pos_ += 8;
        return v;
    }
    Hash256 hash() {
        need(32);
        Hash256 h;
        std::copy(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_) + 32, h.begin());
        pos_ += 32;
        return h;
    }
    std::span<const std::uint8_t> take(std::size_t n) {
        need(n);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) {
        if (pos_ + n > bytes_.size()) throw std::invalid_argument("chain load: truncated record");
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

constexpr char kChainMagic[9] = "GOSIGCH1";

void encode_entry(std::vector<std::uint8_t>& out, const ChainEntry& e, std::uint32_t counter_bits) {
    std::vector<std::uint8_t> rec;
    const Block& b = e.block;
    put_u64(rec, b.height);
    put_hash(rec, b.prev_hash);
    put_u32(rec, b.proposer);
    put_u64(rec, b.proposal_round_origin);
    put_hash(rec, b.seed_sig.value);
    put_u32(rec, static_cast<std::uint32_t>(b.txn_hashes.size()));
    for (const auto& id : b.txn_hashes) put_hash(rec, id);
    const TcMessage& tc = e.cert.tc;
    put_u64(rec, tc.round);
    put_u64(rec, tc.height);
    put_hash(rec, tc.block_hash);
    auto sig = sigagg::serialize(tc.sig, counter_bits);
    rec.insert(rec.end(), sig.begin(), sig.end());
    auto proof = sigagg::serialize(tc.p_proof, counter_bits);
    rec.insert(rec.end(), proof.begin(), proof.end());
    put_u32(out, static_cast<std::uint32_t>(rec.size()));
    out.insert(out.end(), rec.begin(), rec.end());
}

}  // namespace

std::vector<std::uint8_t> ChainReplica::dump(std::uint32_t counter_bits) const {
    return dump_from(1, counter_bits);
}

std::vector<std::uint8_t> ChainReplica::dump_from(std::uint64_t first_height,
                                                  std::uint32_t counter_bits) const {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kChainMagic, kChainMagic + 8);
    std::uint64_t first = std::max<std::uint64_t>(first_height, 1);
    std::uint32_t count =
        first > entries_.size() ? 0 : static_cast<std::uint32_t>(entries_.size() - first + 1);
    put_u32(out, count);
    for (std::uint64_t h = first; h <= entries_.size(); ++h)
        encode_entry(out, entries_[h - 1], counter_bits);
    return out;
}

std::vector<ChainEntry> ChainReplica::parse_entries(std::span<const std::uint8_t> bytes,
                                                    std::uint32_t n_players,
                                                    std::uint32_t counter_bits) {
    Reader r(bytes);
    auto magic = r.take(8);
    if (!std::equal(magic.begin(), magic.end(), kChainMagic))
        throw std::invalid_argument("chain load: bad magic");
    std::uint32_t count = r.u32();
    std::size_t sig_len = 32 + static_cast<std::size_t>(n_players) * (counter_bits / 8);
    std::vector<ChainEntry> entries;
    entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t len = r.u32();
        Reader rec(r.take(len));
        ChainEntry e;
        Block& b = e.block;
        b.height = rec.u64();
        b.prev_hash = rec.hash();
        b.proposer = rec.u32();
        b.proposal_round_origin = rec.u64();
        b.seed_sig.value = rec.hash();
        std::uint32_t ntxn = rec.u32();
        b.txn_hashes.reserve(ntxn);
        for (std::uint32_t t = 0; t < ntxn; ++t) b.txn_hashes.push_back(rec.hash());
        b.block_hash = compute_block_hash(b);
        TcMessage& tc = e.cert.tc;
        tc.round = rec.u64();
        tc.height = rec.u64();
        tc.block_hash = rec.hash();
        tc.sig = sigagg::deserialize(rec.take(sig_len), n_players, counter_bits,
                                     consensus::tc_digest(tc.round, tc.height, tc.block_hash));
        tc.p_proof = sigagg::deserialize(rec.take(sig_len), n_players, counter_bits,
                                         consensus::p_digest(tc.round, tc.height, tc.block_hash));
        if (!rec.done()) throw std::invalid_argument("chain load: trailing bytes in record");
        entries.push_back(std::move(e));
    }
    if (!r.done()) throw std::invalid_argument("chain load: trailing bytes");
    return entries;
}

ChainReplica ChainReplica::load(const sigagg::SigScheme& scheme, std::uint32_t f,
                                const Hash256& genesis_q, std::span<const std::uint8_t> bytes) {
    ChainReplica chain(genesis_q);
    for (const auto& e : parse_entries(bytes, scheme.n_players(), scheme.counter_bits()))
        chain.commit(scheme, f, e.block, e.cert);
    return chain;
}

}  // namespace gosig::ledger
