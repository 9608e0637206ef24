#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace cika {

/// FNV-1a hash, used to turn operation tags into substream keys.
constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// One independent random stream per (seed, op-tag, draw-index) triple.
///
/// Every sampling site in the library derives its own Substream instead of
/// sharing a sequential generator. Results are therefore identical no matter
/// how work is scheduled across threads, and any single draw can be replayed
/// in isolation.
class Substream {
public:
    Substream(std::uint64_t seed, std::string_view op_tag, std::uint64_t draw_index)
        : state_(mix64(mix64(seed ^ fnv1a(op_tag)) ^ draw_index)) {}

    Substream(std::uint64_t seed, std::uint64_t tag_hash, std::uint64_t draw_index)
        : state_(mix64(mix64(seed ^ tag_hash) ^ draw_index)) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1), 53 bits of precision.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool next_bernoulli(double p) { return next_unit() < p; }

    /// Standard normal via Box-Muller; consumes exactly two uniforms.
    double next_gaussian() {
        double u1 = next_unit();
        double u2 = next_unit();
        // Guard the log against an exact zero draw.
        u1 = std::max(u1, 0x1.0p-53);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Uniform integer in [0, bound); bound must be positive.
    std::uint64_t next_below(std::uint64_t bound) {
        // Rejection-free modulo is fine here: bound is tiny relative to 2^64,
        // so the bias is far below anything the tests can resolve.
        return next_u64() % bound;
    }

private:
    std::uint64_t state_;
};

} // namespace cika
