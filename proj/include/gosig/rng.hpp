// Deterministic random source.  All distributions are derived by hand from
// raw mt19937_64 output so that sequences do not depend on the standard
// library's distribution implementations.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace gosig {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t u64() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("below(0)");
        // Rejection sampling to avoid modulo bias.
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = u64();
        } while (v >= limit);
        return v % n;
    }

    bool chance(double p) { return uniform() < p; }

    double exponential(double mean) {
        double u = uniform();
        return -mean * std::log1p(-u);
    }

    // Derive an independent child stream.
    Rng fork() { return Rng(u64() ^ 0x9e3779b97f4a7c15ULL); }

private:
    std::mt19937_64 gen_;
};

}  // namespace gosig
