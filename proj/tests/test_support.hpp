// Shared fixtures: quorum signatures, TC messages and committed chains.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gosig/ledger.hpp"
#include "gosig/messages.hpp"
#include "gosig/sigagg.hpp"

namespace testsup {

using gosig::Hash256;
using gosig::consensus::TcMessage;

inline gosig::sigagg::MultiSignature multi_over(const gosig::sigagg::SigScheme& scheme,
                                                const Hash256& digest,
                                                std::span<const std::uint32_t> signers) {
    auto acc = scheme.zero(digest);
    for (auto i : signers) acc = scheme.aggregate(acc, scheme.sign_digest(scheme.key(i), digest));
    return acc;
}

inline std::vector<std::uint32_t> first_k(std::uint32_t k) {
    std::vector<std::uint32_t> v(k);
    for (std::uint32_t i = 0; i < k; ++i) v[i] = i;
    return v;
}

inline TcMessage make_tc(const gosig::sigagg::SigScheme& scheme, std::uint64_t round,
                         std::uint64_t height, const Hash256& block_hash,
                         std::span<const std::uint32_t> tc_signers,
                         std::span<const std::uint32_t> p_signers) {
    TcMessage tc;
    tc.round = round;
    tc.height = height;
    tc.block_hash = block_hash;
    tc.sig = multi_over(scheme, gosig::consensus::tc_digest(round, height, block_hash), tc_signers);
    tc.p_proof = multi_over(scheme, gosig::consensus::p_digest(round, height, block_hash), p_signers);
    return tc;
}

struct ChainFixture {
    gosig::sigagg::SigScheme scheme;
    std::uint32_t n;
    std::uint32_t f;
    Hash256 genesis_q;
    gosig::ledger::ChainReplica chain;

    ChainFixture(std::uint64_t seed, std::uint32_t n_players)
        : scheme(seed, n_players),
          n(n_players),
          f((n_players - 1) / 3),
          genesis_q(gosig::HashWriter{}.str("test.genesisQ").u64(seed).finish()),
          chain(genesis_q) {}

    gosig::ledger::ChainEntry build_entry(std::uint64_t height, std::uint32_t proposer,
                                          std::uint64_t round,
                                          std::span<const gosig::ledger::Transaction> txns = {}) {
        auto seed_sig = scheme.sign_atomic(scheme.key(proposer),
                                           gosig::sigagg::seed_message_digest(chain.q_at(height - 1)));
        auto block = gosig::ledger::make_block(chain.head(), txns, proposer, round, seed_sig,
                                               1 << 20, chain.committed_txns());
        auto signers = first_k(2 * f + 1);
        gosig::ledger::ChainEntry e{block,
                                    {make_tc(scheme, round, height, block.block_hash, signers, signers)}};
        return e;
    }

    void commit_heights(std::uint64_t upto) {
        for (std::uint64_t h = chain.height() + 1; h <= upto; ++h) {
            auto e = build_entry(h, static_cast<std::uint32_t>((h - 1) % n), h);
            chain.commit(scheme, f, e.block, e.cert);
        }
    }
};

}  // namespace testsup
