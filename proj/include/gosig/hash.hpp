// 256-bit hash primitives shared by every module.
#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gosig {

using Hash256 = std::array<std::uint8_t, 32>;

Hash256 sha256(std::span<const std::uint8_t> data);
Hash256 sha256(std::string_view data);

// Accumulates typed fields into a buffer and hashes the result.  All
// multi-byte integers are appended little-endian so encodings are
// platform-independent.
class HashWriter {
public:
    HashWriter& str(std::string_view s) {
        append(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
        return *this;
    }
    HashWriter& u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        return *this;
    }
    HashWriter& u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        return *this;
    }
    HashWriter& bytes(std::span<const std::uint8_t> b) {
        append(b.data(), b.size());
        return *this;
    }
    HashWriter& hash(const Hash256& h) {
        append(h.data(), h.size());
        return *this;
    }
    Hash256 finish() const { return sha256(std::span<const std::uint8_t>(buf_)); }

private:
    void append(const std::uint8_t* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
    std::vector<std::uint8_t> buf_;
};

std::string to_hex(const Hash256& h);
Hash256 from_hex(std::string_view hex);

inline constexpr Hash256 zero_hash{};

// Big-endian interpretation of the leading 8 bytes; used to map a hash to
// a fraction of the full 256-bit range.
inline std::uint64_t hash_prefix_u64(const Hash256& h) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | h[static_cast<std::size_t>(i)];
    return v;
}

// hash / 2^(hash bits), truncated to double precision.
inline double hash_fraction(const Hash256& h) {
    return static_cast<double>(hash_prefix_u64(h)) / 18446744073709551616.0;
}

}  // namespace gosig
