#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <initializer_list>

namespace tscc {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Order-sensitive hash of a list of words. Used to derive stream keys and
/// per-sample seeds; stable across platforms and releases.
inline uint64_t hash_words(std::initializer_list<uint64_t> words) {
    uint64_t h = 0x6A09E667F3BCC909ULL;
    for (uint64_t w : words) {
        h = mix64(h ^ mix64(w + 0x9E3779B97F4A7C15ULL));
    }
    return h;
}

inline uint64_t double_bits(double x) {
    return std::bit_cast<uint64_t>(x);
}

/// Counter-based random stream: output k is a pure function of (key, k).
/// The full state is two words, so checkpointing is exact and streams can be
/// split by deriving new keys.
class Stream {
   public:
    Stream() = default;
    explicit Stream(uint64_t key, uint64_t counter = 0) : key_(key), counter_(counter) {}

    uint64_t next_u64() {
        return mix64(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). Multiply-shift; bias is below n / 2^64.
    uint32_t below(uint32_t n) {
        return static_cast<uint32_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal deviate (Box-Muller, one output per two draws).
    double normal() {
        double u1 = 1.0 - uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    uint64_t key() const {
        return key_;
    }
    uint64_t counter() const {
        return counter_;
    }

    bool operator==(const Stream &) const = default;

   private:
    uint64_t key_ = 0;
    uint64_t counter_ = 0;
};

}  // namespace tscc
