#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tscc/rng.h"

namespace tscc {

/// Bit-packed configuration of the gauge-fixed model.
///
/// Link spins are stored one bit each (bit 0 is +1, bit 1 is -1), X links first then Y links, in
/// registry order. Each triangle stores a 2-bit code (b0, b1) from which its three zz spins are
/// (b0, b1, b0 ^ b1); the four codes are exactly the four sign patterns with product +1, so the
/// triangle constraint cannot be violated.
class SpinState {
   public:
    SpinState() = default;
    SpinState(uint32_t num_links, uint32_t num_triangles);

    uint32_t num_links() const {
        return num_links_;
    }
    uint32_t num_triangles() const {
        return num_triangles_;
    }
    /// Number of Ising spins in the registry layout: links then one zz spin per qubit.
    uint32_t num_spins() const {
        return num_links_ + 3 * num_triangles_;
    }

    bool link_bit(uint32_t i) const {
        return (links_[i >> 6] >> (i & 63)) & 1;
    }
    void flip_link(uint32_t i) {
        links_[i >> 6] ^= uint64_t{1} << (i & 63);
    }
    void set_link(uint32_t i, bool bit) {
        if (link_bit(i) != bit) {
            flip_link(i);
        }
    }

    uint32_t triangle_code(uint32_t t) const {
        return static_cast<uint32_t>(triangles_[t >> 5] >> (2 * (t & 31))) & 3;
    }
    void set_triangle_code(uint32_t t, uint32_t code) {
        uint64_t &word = triangles_[t >> 5];
        int shift = 2 * (t & 31);
        word = (word & ~(uint64_t{3} << shift)) | (static_cast<uint64_t>(code & 3) << shift);
    }
    /// XOR the code of triangle t with d in {1, 2, 3}; flips exactly two zz spins.
    void toggle_triangle(uint32_t t, uint32_t d) {
        triangles_[t >> 5] ^= static_cast<uint64_t>(d & 3) << (2 * (t & 31));
    }

    static bool zz_from_code(uint32_t code, uint32_t corner) {
        return corner == 2 ? ((code ^ (code >> 1)) & 1) : ((code >> corner) & 1);
    }
    /// zz spin bit of qubit q = 3t + corner.
    bool zz_bit(uint32_t qubit) const {
        return zz_from_code(triangle_code(qubit / 3), qubit % 3);
    }

    /// +1 or -1 for the registry spin index.
    int spin(uint32_t index) const {
        bool bit = index < num_links_ ? link_bit(index) : zz_bit(index - num_links_);
        return bit ? -1 : 1;
    }

    std::vector<int8_t> to_spins() const;
    /// Throws std::invalid_argument if a triangle's zz product is not +1.
    static SpinState from_spins(std::span<const int8_t> spins, uint32_t num_links, uint32_t num_triangles);

    void randomize(Stream &rng);

    std::span<const uint64_t> link_words() const {
        return links_;
    }
    std::span<const uint64_t> triangle_words() const {
        return triangles_;
    }
    std::span<uint64_t> link_words() {
        return links_;
    }
    std::span<uint64_t> triangle_words() {
        return triangles_;
    }

    bool operator==(const SpinState &) const = default;

   private:
    uint32_t num_links_ = 0;
    uint32_t num_triangles_ = 0;
    std::vector<uint64_t> links_;
    std::vector<uint64_t> triangles_;
};

}  // namespace tscc
