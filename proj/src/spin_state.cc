#include "tscc/spin_state.h"

#include <stdexcept>
#include <string>

namespace tscc {

SpinState::SpinState(uint32_t num_links, uint32_t num_triangles)
    : num_links_(num_links),
      num_triangles_(num_triangles),
      links_((num_links + 63) / 64, 0),
      triangles_((num_triangles + 31) / 32, 0) {
}

std::vector<int8_t> SpinState::to_spins() const {
    std::vector<int8_t> out(num_spins());
    for (uint32_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<int8_t>(spin(i));
    }
    return out;
}

SpinState SpinState::from_spins(std::span<const int8_t> spins, uint32_t num_links, uint32_t num_triangles) {
    SpinState s(num_links, num_triangles);
    if (spins.size() != s.num_spins()) {
        throw std::invalid_argument("spin vector has " + std::to_string(spins.size()) + " entries, expected " +
                                    std::to_string(s.num_spins()));
    }
    for (uint32_t i = 0; i < num_links; ++i) {
        s.set_link(i, spins[i] < 0);
    }
    for (uint32_t t = 0; t < num_triangles; ++t) {
        const int8_t *zz = spins.data() + num_links + 3 * t;
        if (zz[0] * zz[1] * zz[2] != 1) {
            throw std::invalid_argument("zz constraint violated on triangle " + std::to_string(t));
        }
        s.set_triangle_code(t, (zz[0] < 0 ? 1u : 0u) | (zz[1] < 0 ? 2u : 0u));
    }
    return s;
}

void SpinState::randomize(Stream &rng) {
    for (uint32_t i = 0; i < num_links_; ++i) {
        set_link(i, rng.next_u64() >> 63);
    }
    for (uint32_t t = 0; t < num_triangles_; ++t) {
        set_triangle_code(t, static_cast<uint32_t>(rng.next_u64() >> 62));
    }
}

}  // namespace tscc
