// Stage II vote messages.  A P message carries an aggregated prepare
// signature; a TC message additionally embeds the (2f+1)-signed P proof that
// justified the tentative commit.  Certificates in the ledger wrap TC
// messages, so these types sit below the block types.
#pragma once

#include <cstdint>

#include "gosig/hash.hpp"
#include "gosig/sigagg.hpp"

namespace gosig::consensus {

Hash256 p_digest(std::uint64_t round, std::uint64_t height, const Hash256& block_hash);
Hash256 tc_digest(std::uint64_t round, std::uint64_t height, const Hash256& block_hash);

struct PMessage {
    std::uint64_t round = 0;
    std::uint64_t height = 0;
    Hash256 block_hash{};
    sigagg::MultiSignature sig;

    bool operator==(const PMessage&) const = default;
};

struct TcMessage {
    std::uint64_t round = 0;
    std::uint64_t height = 0;
    Hash256 block_hash{};
    sigagg::MultiSignature sig;
    sigagg::MultiSignature p_proof;

    bool operator==(const TcMessage&) const = default;
};

// Structural + signature validity (not the state-machine gates).
bool validate_p_message(const sigagg::SigScheme& scheme, const PMessage& msg);
// A TC is only as good as its embedded prepare quorum: the P proof must be
// (2f+1)-signed for the same (block, height, round).
bool validate_tc_message(const sigagg::SigScheme& scheme, std::uint32_t f, const TcMessage& msg);

}  // namespace gosig::consensus
