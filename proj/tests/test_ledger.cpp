#include <doctest.h>

#include <vector>

#include "gosig/ledger.hpp"
#include "test_support.hpp"

using namespace gosig;
using namespace gosig::ledger;
using testsup::ChainFixture;

namespace {

std::vector<Transaction> some_txns(int n, std::int64_t t0 = 0) {
    std::vector<Transaction> txns;
    for (int i = 0; i < n; ++i) {
        std::vector<std::uint8_t> payload(8, static_cast<std::uint8_t>(i + 1));
        txns.push_back(make_transaction(std::move(payload), t0 + i));
    }
    return txns;
}

}  // namespace

TEST_CASE("transaction ids are content-derived") {
    auto a = make_transaction({1, 2, 3}, 5);
    auto b = make_transaction({1, 2, 3}, 9);
    auto c = make_transaction({1, 2, 4}, 5);
    CHECK(a.id == b.id);
    CHECK(a.id != c.id);
}

TEST_CASE("make_block base case, duplicate exclusion, determinism") {
    ChainFixture fx(11, 4);
    auto txns = some_txns(3);
    auto seed = fx.scheme.sign_atomic(fx.scheme.key(0),
                                      sigagg::seed_message_digest(fx.genesis_q));
    auto b = make_block(nullptr, txns, 0, 1, seed, 100, {});
    CHECK(b.height == 1);
    CHECK(b.prev_hash == zero_hash);
    CHECK(b.txn_hashes.size() == 3);

    auto b2 = make_block(nullptr, txns, 0, 1, seed, 100, {});
    CHECK(b == b2);  // identical inputs, identical block

    TxnSet committed;
    committed.insert(txns[1].id);
    CHECK_THROWS_AS(make_block(nullptr, txns, 0, 1, seed, 100, committed), std::invalid_argument);
    CHECK_THROWS_AS(make_block(nullptr, txns, 0, 1, seed, 2, {}), std::invalid_argument);

    std::vector<Transaction> dup = {txns[0], txns[0]};
    CHECK_THROWS_AS(make_block(nullptr, dup, 0, 1, seed, 100, {}), std::invalid_argument);
}

TEST_CASE("validate_block checks link, height, duplicates and spent txns") {
    ChainFixture fx(12, 4);
    fx.commit_heights(2);
    const Block* head = fx.chain.head();
    auto txns = some_txns(2);
    auto seed = fx.scheme.sign_atomic(fx.scheme.key(1),
                                      sigagg::seed_message_digest(fx.chain.q_at(2)));
    auto b = make_block(head, txns, 1, 3, seed, 100, fx.chain.committed_txns());
    CHECK(validate_block(b, head, fx.chain.committed_txns()));

    auto broken = b;
    broken.prev_hash = fx.chain.block_at(1)->block_hash;  // grandparent
    broken.block_hash = compute_block_hash(broken);
    CHECK_FALSE(validate_block(broken, head, fx.chain.committed_txns()));

    auto dup = b;
    dup.txn_hashes.push_back(dup.txn_hashes[0]);
    dup.block_hash = compute_block_hash(dup);
    CHECK_FALSE(validate_block(dup, head, fx.chain.committed_txns()));

    auto tampered = b;
    tampered.proposer = 2;  // hash no longer binds
    CHECK_FALSE(validate_block(tampered, head, fx.chain.committed_txns()));
}

TEST_CASE("proposal certificate cases") {
    ChainFixture fx(13, 7);  // f = 2, quorum 5
    fx.commit_heights(1);
    const std::uint32_t proposer = 3;
    auto seed = fx.scheme.sign_atomic(fx.scheme.key(proposer),
                                      sigagg::seed_message_digest(fx.chain.q_at(1)));
    auto b = make_block(fx.chain.head(), {}, proposer, 6, seed, 100, fx.chain.committed_txns());

    SUBCASE("case 2: r_p = r' + 1") {
        auto quorum = testsup::first_k(5);
        auto tc = testsup::make_tc(fx.scheme, 5, 1, b.prev_hash, quorum, quorum);
        ProposalCertificate cert{ProposalCertificate::Kind::case2, tc};
        auto rp = validate_proposal_certificate(fx.scheme, cert, b, proposer, 2, 6, fx.f);
        REQUIRE(rp.has_value());
        CHECK(*rp == 6);

        // Embedded TC doubles as a commitment certificate of the parent.
        CommitmentCertificate cc{tc};
        CHECK(validate_commitment_certificate(fx.scheme, fx.f, cc, b.prev_hash, 1));
    }
    SUBCASE("case 2 with only 2f signers is invalid") {
        auto weak = testsup::first_k(4);
        auto quorum = testsup::first_k(5);
        auto tc = testsup::make_tc(fx.scheme, 5, 1, b.prev_hash, weak, quorum);
        ProposalCertificate cert{ProposalCertificate::Kind::case2, tc};
        CHECK_FALSE(validate_proposal_certificate(fx.scheme, cert, b, proposer, 2, 6, fx.f).has_value());
    }
    SUBCASE("case 1: r_p = r'") {
        std::vector<std::uint32_t> own = {proposer};
        auto quorum = testsup::first_k(5);
        auto tc = testsup::make_tc(fx.scheme, 5, 2, b.block_hash, own, quorum);
        ProposalCertificate cert{ProposalCertificate::Kind::case1, tc};
        auto rp = validate_proposal_certificate(fx.scheme, cert, b, proposer, 2, 6, fx.f);
        REQUIRE(rp.has_value());
        CHECK(*rp == 5);

        // Certificates from the current or a later round are invalid.
        CHECK_FALSE(validate_proposal_certificate(fx.scheme, cert, b, proposer, 2, 5, fx.f).has_value());
        CHECK_FALSE(validate_proposal_certificate(fx.scheme, cert, b, proposer, 2, 4, fx.f).has_value());
    }
    SUBCASE("case 1 must be signed by the proposer") {
        std::vector<std::uint32_t> other = {1};
        auto quorum = testsup::first_k(5);
        auto tc = testsup::make_tc(fx.scheme, 5, 2, b.block_hash, other, quorum);
        ProposalCertificate cert{ProposalCertificate::Kind::case1, tc};
        CHECK_FALSE(validate_proposal_certificate(fx.scheme, cert, b, proposer, 2, 6, fx.f).has_value());
    }
    SUBCASE("case 1 embedded P proof below quorum is invalid") {
        std::vector<std::uint32_t> own = {proposer};
        auto weak = testsup::first_k(4);
        auto tc = testsup::make_tc(fx.scheme, 5, 2, b.block_hash, own, weak);
        ProposalCertificate cert{ProposalCertificate::Kind::case1, tc};
        CHECK_FALSE(validate_proposal_certificate(fx.scheme, cert, b, proposer, 2, 6, fx.f).has_value());
    }
    SUBCASE("genesis kind only for height one") {
        ProposalCertificate cert{ProposalCertificate::Kind::genesis, std::nullopt};
        CHECK_FALSE(validate_proposal_certificate(fx.scheme, cert, b, proposer, 2, 6, fx.f).has_value());

        ChainFixture fresh(14, 7);
        auto gseed = fresh.scheme.sign_atomic(fresh.scheme.key(0),
                                              sigagg::seed_message_digest(fresh.genesis_q));
        auto g = make_block(nullptr, {}, 0, 1, gseed, 100, {});
        auto rp = validate_proposal_certificate(fresh.scheme, cert, g, 0, 1, 1, fresh.f);
        REQUIRE(rp.has_value());
        CHECK(*rp == 1);
    }
}

TEST_CASE("commit advances the head and the Q chain") {
    ChainFixture fx(15, 4);
    fx.commit_heights(3);
    CHECK(fx.chain.height() == 3);

    auto e4 = fx.build_entry(4, 2, 7);
    fx.chain.commit(fx.scheme, fx.f, e4.block, e4.cert);
    CHECK(fx.chain.height() == 4);
    CHECK(fx.chain.head_hash() == e4.block.block_hash);
    CHECK(fx.chain.sortition().height == 4);
    CHECK(fx.chain.q_at(4) != fx.chain.q_at(3));

    // Idempotent re-commit.
    fx.chain.commit(fx.scheme, fx.f, e4.block, e4.cert);
    CHECK(fx.chain.height() == 4);

    // Gap: head is 4, committing height 6 fails.
    ChainFixture other(15, 4);
    other.commit_heights(5);
    auto e6 = other.build_entry(6, 1, 9);
    CHECK_THROWS_AS(fx.chain.commit(fx.scheme, fx.f, e6.block, e6.cert), std::invalid_argument);

    // Certificate below quorum fails.
    auto e5 = fx.build_entry(5, 0, 8);
    auto weak_signers = testsup::first_k(2 * fx.f);
    e5.cert.tc.sig = testsup::multi_over(
        fx.scheme, gosig::consensus::tc_digest(8, 5, e5.block.block_hash), weak_signers);
    CHECK_THROWS_AS(fx.chain.commit(fx.scheme, fx.f, e5.block, e5.cert), std::invalid_argument);
}

TEST_CASE("re-commit of a conflicting block at a committed height is an error") {
    ChainFixture fx(16, 4);
    fx.commit_heights(2);
    ChainFixture alt(16, 4);
    alt.commit_heights(1);
    auto conflicting = alt.build_entry(2, 3, 9);
    CHECK_THROWS_AS(fx.chain.commit(fx.scheme, fx.f, conflicting.block, conflicting.cert),
                    std::logic_error);
}

TEST_CASE("dump and load round trip with offline validation") {
    ChainFixture fx(17, 7);
    auto txns = some_txns(4);
    auto seed1 = fx.scheme.sign_atomic(fx.scheme.key(2),
                                       sigagg::seed_message_digest(fx.genesis_q));
    auto b1 = make_block(nullptr, std::span(txns.data(), 2), 2, 1, seed1, 100, {});
    auto q5 = testsup::first_k(5);
    fx.chain.commit(fx.scheme, fx.f, b1, {testsup::make_tc(fx.scheme, 1, 1, b1.block_hash, q5, q5)});
    auto seed2 = fx.scheme.sign_atomic(fx.scheme.key(4),
                                       sigagg::seed_message_digest(fx.chain.q_at(1)));
    auto b2 = make_block(fx.chain.head(), std::span(txns.data() + 2, 2), 4, 3, seed2, 100,
                         fx.chain.committed_txns());
    fx.chain.commit(fx.scheme, fx.f, b2, {testsup::make_tc(fx.scheme, 3, 2, b2.block_hash, q5, q5)});

    auto bytes = fx.chain.dump(32);

    // A fresh verifier rebuilt from public parameters accepts the chain.
    sigagg::SigScheme verifier(17, 7);
    auto loaded = ChainReplica::load(verifier, fx.f, fx.genesis_q, bytes);
    CHECK(loaded.height() == 2);
    CHECK(loaded.head_hash() == fx.chain.head_hash());
    CHECK(loaded.q_at(2) == fx.chain.q_at(2));
    CHECK(loaded.txn_committed(txns[0].id));
    CHECK(loaded.dump(32) == bytes);

    // Tampering with any byte of a block breaks validation.
    auto corrupt = bytes;
    corrupt[16] ^= 0x40;
    CHECK_THROWS(ChainReplica::load(verifier, fx.f, fx.genesis_q, corrupt));

    auto truncated = bytes;
    truncated.resize(truncated.size() - 3);
    CHECK_THROWS(ChainReplica::load(verifier, fx.f, fx.genesis_q, truncated));

    // Partial dumps parse into entries usable for catch-up.
    auto tail = fx.chain.dump_from(2, 32);
    auto entries = ChainReplica::parse_entries(tail, 7, 32);
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].block.block_hash == b2.block_hash);
}
