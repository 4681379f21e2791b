#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "gosig/rng.hpp"
#include "gosig/sigagg.hpp"

using namespace gosig;
using namespace gosig::sigagg;

namespace {

std::span<const std::uint8_t> bytes_of(const char* s) {
    return {reinterpret_cast<const std::uint8_t*>(s), std::strlen(s)};
}

// Independent transcription of the merge-guard rule, kept separate from the
// implementation on purpose.
bool guard_rule(const std::vector<std::uint64_t>& summed, double B, double N) {
    std::uint64_t mx = 0;
    double s = 0;
    for (auto v : summed) {
        if (v > 0) s += 1;
        mx = std::max(mx, v);
    }
    if (mx <= s) return true;
    return std::log2(static_cast<double>(mx)) < B * s / N;
}

MultiSignature sig_with_counters(const SigScheme& scheme, const Hash256& md,
                                 std::vector<std::uint32_t> counters) {
    MultiSignature sig;
    sig.message_digest = md;
    sig.tag = scheme.tag_for(md, counters);
    sig.counters = std::move(counters);
    return sig;
}

}  // namespace

TEST_CASE("keygen determinism and distinctness") {
    auto a1 = keygen(7, 0, 4);
    auto a2 = keygen(7, 0, 4);
    CHECK(a1.secret == a2.secret);
    CHECK(a1.public_key == a2.public_key);
    auto b = keygen(7, 1, 4);
    CHECK(a1.public_key != b.public_key);
    auto c = keygen(8, 0, 4);
    CHECK(a1.public_key != c.public_key);
    CHECK_THROWS(keygen(7, 4, 4));
}

TEST_CASE("sign/verify round trip") {
    SigScheme scheme(7, 4);
    auto sig = scheme.sign(scheme.key(0), bytes_of("m"));
    CHECK(sig.counters == std::vector<std::uint32_t>{1, 0, 0, 0});
    CHECK(scheme.verify(sig, bytes_of("m"), scheme.public_keys()));
    CHECK_FALSE(scheme.verify(sig, bytes_of("m2"), scheme.public_keys()));

    // Wrong public key for a signer is rejected.
    auto pubs = scheme.public_keys();
    pubs[0][0] ^= 1;
    CHECK_FALSE(scheme.verify(sig, bytes_of("m"), pubs));
}

TEST_CASE("aggregate counter addition and monoid laws") {
    SigScheme scheme(7, 4);
    Hash256 md = sha256(bytes_of("m"));
    auto s0 = scheme.sign_digest(scheme.key(0), md);
    auto s1 = scheme.sign_digest(scheme.key(1), md);
    auto s2 = scheme.sign_digest(scheme.key(2), md);

    auto a = scheme.aggregate(s0, s2);
    CHECK(a.counters == std::vector<std::uint32_t>{1, 0, 1, 0});
    auto merged = scheme.aggregate(a, s1);
    CHECK(merged.counters == std::vector<std::uint32_t>{1, 1, 1, 0});
    CHECK(scheme.verify_digest(merged, md));
    CHECK(merged.signer_count() == 3);

    CHECK(scheme.aggregate(s0, s1) == scheme.aggregate(s1, s0));
    CHECK(scheme.aggregate(scheme.aggregate(s0, s1), s2) ==
          scheme.aggregate(s0, scheme.aggregate(s1, s2)));

    auto id = scheme.zero(md);
    CHECK(scheme.aggregate(id, s0) == s0);
    CHECK(scheme.aggregate(s0, id) == s0);

    Hash256 md2 = sha256(bytes_of("m2"));
    auto other = scheme.sign_digest(scheme.key(0), md2);
    CHECK_THROWS_AS(scheme.aggregate(s0, other), std::invalid_argument);
}

TEST_CASE("aggregate property sweep: commutative, associative, signer monotonicity") {
    SigScheme scheme(3, 7);
    Hash256 md = sha256(bytes_of("prop"));
    Rng rng(99);
    auto random_sig = [&] {
        MultiSignature acc = scheme.zero(md);
        int k = 1 + static_cast<int>(rng.below(4));
        for (int i = 0; i < k; ++i) {
            auto s = scheme.sign_digest(scheme.key(static_cast<std::uint32_t>(rng.below(7))), md);
            acc = scheme.aggregate(acc, s);
        }
        return acc;
    };
    for (int i = 0; i < 500; ++i) {
        auto a = random_sig();
        auto b = random_sig();
        auto c = random_sig();
        auto ab = scheme.aggregate(a, b);
        CHECK(ab == scheme.aggregate(b, a));
        CHECK(scheme.aggregate(ab, c) == scheme.aggregate(a, scheme.aggregate(b, c)));
        CHECK(ab.signer_count() >= std::max(a.signer_count(), b.signer_count()));
        CHECK(scheme.verify_digest(ab, md));
    }
}

TEST_CASE("verify rejects tampered counters and tags") {
    SigScheme scheme(7, 4);
    Hash256 md = sha256(bytes_of("m"));
    auto sig = scheme.aggregate(scheme.aggregate(scheme.sign_digest(scheme.key(0), md),
                                                 scheme.sign_digest(scheme.key(1), md)),
                                scheme.sign_digest(scheme.key(2), md));
    CHECK(scheme.verify_digest(sig, md));

    auto bumped = sig;
    bumped.counters[3] += 1;
    CHECK_FALSE(scheme.verify_digest(bumped, md));

    auto forged = sig;
    forged.tag = sha256(bytes_of("garbage"));
    CHECK_FALSE(scheme.verify_digest(forged, md));

    // Single-bit perturbations of tag or counters are rejected.
    Rng rng(4242);
    for (int i = 0; i < 64; ++i) {
        auto mut = sig;
        if (rng.chance(0.5)) {
            mut.tag[rng.below(32)] ^= static_cast<std::uint8_t>(1u << rng.below(8));
        } else {
            mut.counters[rng.below(4)] ^= 1u << rng.below(20);
        }
        if (mut == sig) continue;
        CHECK_FALSE(scheme.verify_digest(mut, md));
    }
}

TEST_CASE("signer_count counts distinct signers, not multiplicity") {
    SigScheme scheme(7, 4);
    Hash256 md = sha256(bytes_of("m"));
    auto s0 = scheme.sign_digest(scheme.key(0), md);
    auto s2 = scheme.sign_digest(scheme.key(2), md);
    auto twice = scheme.aggregate(scheme.aggregate(s0, s2), s2);
    CHECK(twice.counters == std::vector<std::uint32_t>{1, 0, 2, 0});
    CHECK(twice.signer_count() == 2);
    CHECK(scheme.zero(md).signer_count() == 0);

    SigScheme three(7, 3);
    Hash256 md3 = sha256(bytes_of("m"));
    auto full = three.aggregate(three.aggregate(three.sign_digest(three.key(0), md3),
                                                three.sign_digest(three.key(1), md3)),
                                three.sign_digest(three.key(2), md3));
    CHECK(full.signer_count() == 3);
}

TEST_CASE("guard_overflow matches the rule on frozen cases") {
    // Expected values evaluated from the rule by hand:
    //   s=10, max=10  -> accept (10 <= 10)
    //   s=1,  max=2   -> reject (2 > 1 and log2(2)=1 >= 32*1/100=0.32)
    //   s=1,  max=2^32-1 -> reject (overflow attack)
    SigScheme scheme(7, 100);
    Hash256 md = sha256(bytes_of("m"));

    std::vector<std::uint32_t> local_c(100, 0), in_c(100, 0);
    for (int i = 0; i < 10; ++i) local_c[static_cast<std::size_t>(i)] = (i < 5) ? 10 : 3;
    in_c[2] = 0;
    auto local = sig_with_counters(scheme, md, local_c);
    auto incoming = sig_with_counters(scheme, md, in_c);
    CHECK(guard_overflow(local, incoming, 32, 100));

    std::vector<std::uint64_t> summed(100, 0);
    for (int i = 0; i < 100; ++i) summed[static_cast<std::size_t>(i)] = local_c[static_cast<std::size_t>(i)];
    CHECK(guard_rule(summed, 32, 100));

    std::vector<std::uint32_t> one(100, 0), one_more(100, 0);
    one[4] = 1;
    one_more[4] = 1;
    auto a = sig_with_counters(scheme, md, one);
    auto b = sig_with_counters(scheme, md, one_more);
    CHECK_FALSE(guard_overflow(a, b, 32, 100));
    CHECK_FALSE(guard_rule({2}, 32, 100));

    std::vector<std::uint32_t> attack(100, 0);
    attack[9] = 0xffffffffu;
    auto crafted = sig_with_counters(scheme, md, attack);
    auto empty = scheme.zero(md);
    CHECK_FALSE(guard_overflow(empty, crafted, 32, 100));
    CHECK_FALSE(guard_rule({0xffffffffull}, 32, 100));
}

TEST_CASE("guard_overflow never rejects disjoint all-ones merges") {
    SigScheme scheme(11, 64);
    Hash256 md = sha256(bytes_of("m"));
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::uint32_t> local_c(64, 0), in_c(64, 0);
        for (std::uint32_t i = 0; i < 64; ++i) {
            switch (rng.below(4)) {
                case 0: local_c[i] = 1; break;
                case 1: in_c[i] = 1; break;
                default: break;
            }
        }
        auto local = sig_with_counters(scheme, md, local_c);
        auto incoming = sig_with_counters(scheme, md, in_c);
        CHECK(guard_overflow(local, incoming, 32, 64));
    }
}

TEST_CASE("encoded_size formula") {
    CHECK(encoded_size(1000, 2048, 32) == 4256);
    CHECK(1000 * 2048 / 8 == 256000);  // naive concatenation for comparison
    CHECK(encoded_size(4, 256, 32) == 48);
}

TEST_CASE("multi-signature wire layout golden bytes") {
    MultiSignature sig;
    for (std::size_t i = 0; i < 32; ++i) sig.tag[i] = static_cast<std::uint8_t>(i);
    sig.counters = {1, 2, 3, 0x01020304};
    auto wire = serialize(sig, 32);
    std::vector<std::uint8_t> expect;
    for (int i = 0; i < 32; ++i) expect.push_back(static_cast<std::uint8_t>(i));
    const std::uint8_t tail[] = {1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0, 0x04, 0x03, 0x02, 0x01};
    expect.insert(expect.end(), std::begin(tail), std::end(tail));
    CHECK(wire == expect);

    auto back = deserialize(wire, 4, 32, sig.message_digest);
    CHECK(back == sig);
}

TEST_CASE("leader score determinism and proof verification") {
    SigScheme scheme(7, 16);
    SortitionState st{sha256(bytes_of("genesis")), 0};
    auto p1 = scheme.leader_score(scheme.key(3), 5, st);
    auto p2 = scheme.leader_score(scheme.key(3), 5, st);
    CHECK(p1.score == p2.score);
    CHECK(p1.signature == p2.signature);

    // Find one potential leader and one non-leader for q = 7/16.
    double q = leader_threshold(16, 7);
    CHECK(q == doctest::Approx(7.0 / 16.0));
    int leader = -1, loser = -1;
    for (std::uint32_t i = 0; i < 16; ++i) {
        auto p = scheme.leader_score(scheme.key(i), 5, st);
        if (p.score < q && leader < 0) leader = static_cast<int>(i);
        if (p.score >= q && loser < 0) loser = static_cast<int>(i);
    }
    REQUIRE(leader >= 0);
    REQUIRE(loser >= 0);
    auto good = scheme.leader_score(scheme.key(static_cast<std::uint32_t>(leader)), 5, st);
    CHECK(scheme.verify_leader_proof(good, static_cast<std::uint32_t>(leader), 5, st, q));
    // Replay for the next round fails: the signed message binds r.
    CHECK_FALSE(scheme.verify_leader_proof(good, static_cast<std::uint32_t>(leader), 6, st, q));
    // Another player cannot claim the proof.
    CHECK_FALSE(scheme.verify_leader_proof(good, static_cast<std::uint32_t>(loser), 5, st, q));
    auto bad = scheme.leader_score(scheme.key(static_cast<std::uint32_t>(loser)), 5, st);
    CHECK_FALSE(scheme.verify_leader_proof(bad, static_cast<std::uint32_t>(loser), 5, st, q));

    CHECK(leader_threshold(4, 7) == 1.0);
}

TEST_CASE("leader scores are uniform (Kolmogorov-Smirnov, alpha=0.01)") {
    SigScheme scheme(13, 100);
    SortitionState st{sha256(bytes_of("ks-seed")), 0};
    std::vector<double> samples;
    samples.reserve(10000);
    for (std::uint64_t r = 0; r < 100; ++r) {
        for (std::uint32_t i = 0; i < 100; ++i) {
            samples.push_back(scheme.leader_score(scheme.key(i), r, st).score);
        }
    }
    std::sort(samples.begin(), samples.end());
    double n = static_cast<double>(samples.size());
    double d = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double hi = (static_cast<double>(i) + 1) / n - samples[i];
        double lo = samples[i] - static_cast<double>(i) / n;
        d = std::max({d, hi, lo});
    }
    // Critical D for alpha=0.01 is 1.62762/sqrt(n).
    CHECK(d < 1.62762 / std::sqrt(n));
}

TEST_CASE("no-leader round fraction approximates (1-q)^N") {
    // Closed-form oracle: (1 - 7/100)^100.
    double expect = std::pow(1.0 - 0.07, 100);
    CHECK(expect == doctest::Approx(7.052e-4).epsilon(0.01));

    SigScheme scheme(21, 100);
    SortitionState st{sha256(bytes_of("sortition")), 0};
    double q = leader_threshold(100, 7);
    const std::uint64_t rounds = 20000;
    std::uint64_t empty = 0;
    for (std::uint64_t r = 1; r <= rounds; ++r) {
        bool any = false;
        for (std::uint32_t i = 0; i < 100 && !any; ++i) {
            if (scheme.leader_score(scheme.key(i), r, st).score < q) any = true;
        }
        if (!any) ++empty;
    }
    double frac = static_cast<double>(empty) / static_cast<double>(rounds);
    double sigma = std::sqrt(expect * (1 - expect) / static_cast<double>(rounds));
    CHECK(std::abs(frac - expect) < 4 * sigma);
    CHECK(frac < 0.001);
}

TEST_CASE("next_q chains deterministically and validates the signature") {
    SigScheme scheme(7, 8);
    SortitionState q0{sha256(bytes_of("genesis")), 0};
    auto sig1 = scheme.sign_atomic(scheme.key(2), seed_message_digest(q0.q));
    auto q1 = scheme.next_q(q0, 2, sig1);
    CHECK(q1.height == 1);
    CHECK(q1.q != q0.q);

    auto sig2 = scheme.sign_atomic(scheme.key(5), seed_message_digest(q1.q));
    auto q2 = scheme.next_q(q1, 5, sig2);
    auto sig3 = scheme.sign_atomic(scheme.key(0), seed_message_digest(q2.q));
    auto q3 = scheme.next_q(q2, 0, sig3);
    CHECK(q1.q != q2.q);
    CHECK(q2.q != q3.q);
    CHECK(q3.height == 3);

    // Two replicas applying the same commit sequence agree.
    auto q1b = scheme.next_q(q0, 2, sig1);
    CHECK(q1b == q1);

    // Wrong signer or wrong message is an error.
    CHECK_THROWS_AS(scheme.next_q(q0, 3, sig1), std::invalid_argument);
    CHECK_THROWS_AS(scheme.next_q(q1, 2, sig1), std::invalid_argument);
}

TEST_CASE("counter overflow is rejected at aggregation") {
    SigScheme scheme(7, 4);
    Hash256 md = sha256(bytes_of("m"));
    std::vector<std::uint32_t> big(4, 0);
    big[1] = 0xffffffffu;
    auto a = sig_with_counters(scheme, md, big);
    auto b = scheme.sign_digest(scheme.key(1), md);
    CHECK_THROWS_AS(scheme.aggregate(a, b), std::overflow_error);
}
