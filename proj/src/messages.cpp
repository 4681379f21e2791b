#include "gosig/messages.hpp"

namespace gosig::consensus {

Hash256 p_digest(std::uint64_t round, std::uint64_t height, const Hash256& block_hash) {
    return HashWriter{}.str("gosig.P").u64(round).u64(height).hash(block_hash).finish();
}

Hash256 tc_digest(std::uint64_t round, std::uint64_t height, const Hash256& block_hash) {
    return HashWriter{}.str("gosig.TC").u64(round).u64(height).hash(block_hash).finish();
}

bool validate_p_message(const sigagg::SigScheme& scheme, const PMessage& msg) {
    if (msg.sig.signer_count() == 0) return false;
    return scheme.verify_digest(msg.sig, p_digest(msg.round, msg.height, msg.block_hash));
}

bool validate_tc_message(const sigagg::SigScheme& scheme, std::uint32_t f, const TcMessage& msg) {
    if (msg.sig.signer_count() == 0) return false;
    if (!scheme.verify_digest(msg.sig, tc_digest(msg.round, msg.height, msg.block_hash)))
        return false;
    if (msg.p_proof.signer_count() < 2 * f + 1) return false;
    return scheme.verify_digest(msg.p_proof, p_digest(msg.round, msg.height, msg.block_hash));
}

}  // namespace gosig::consensus
