#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tscc/lattice.h"
#include "tscc/model.h"

namespace tscc {

/// Exhaustive enumeration stays below this many binary degrees of freedom. The smallest
/// three-colorable torus already has 30, so the bound sits just above it.
constexpr uint32_t kMaxEnumerationBits = 32;

class EnumerationTooLarge : public std::length_error {
   public:
    using std::length_error::length_error;
};

/// Exact Boltzmann averages at one inverse temperature. Index 0..2 is the color class A..C.
struct ExactThermal {
    double beta = 0;
    double energy = 0;
    double energy_sq = 0;
    std::array<double, 3> m{};
    std::array<double, 3> m2{};
    /// (1 / N_P) <|F_P(0)|^2>
    std::array<double, 3> chi0{};
    /// (1 / N_P) <|F_P(k_min)|^2>
    std::array<double, 3> chik{};
};

/// Energy-resolved sums over every constraint-satisfying state; independent of temperature.
struct EnergyResolvedSums {
    int64_t energy_offset = 0;  // level k has energy energy_offset + 2 k
    std::vector<uint64_t> count;
    std::vector<std::array<int64_t, 3>> sum_f0;
    std::vector<std::array<int64_t, 3>> sum_f0_sq;
    std::vector<std::array<double, 3>> sum_fk_sq;
    std::array<uint32_t, 3> class_size{};

    ExactThermal at(double beta) const;
    /// Energy level -> number of states.
    std::map<int64_t, uint64_t> spectrum() const;
};

/// Gray-code walk over all 2^(n + 2 T) gauge-fixed states, parallel over prefix chunks with a
/// fixed reduction order.
EnergyResolvedSums enumerate_states(const Lattice &lat, const InteractionTable &table,
                                    const DisorderRealization &disorder);

std::vector<ExactThermal> enumerate_thermal(const Lattice &lat, const InteractionTable &table,
                                            const DisorderRealization &disorder, std::span<const double> betas);

/// Energy multiset of the model before gauge fixing: one spin per link and per Z generator,
/// terms are the raw generator products. Free bits: n + 3 T.
std::map<int64_t, uint64_t> ungauged_spectrum(const InteractionTable &table, const DisorderRealization &disorder);

struct GaugeFixingReport {
    bool equivalent = false;
    uint64_t degeneracy_factor = 0;
    std::map<int64_t, uint64_t> gauge_fixed;
    std::map<int64_t, uint64_t> ungauged;
    /// Empty when equivalent; otherwise the first level where the multisets differ.
    std::string first_mismatch;
};

/// Compares the ungauged energy multiset with the gauge-fixed one scaled by 2^(#triangles).
GaugeFixingReport verify_gauge_fixing(const Lattice &lat, const InteractionTable &table,
                                      const DisorderRealization &disorder);

namespace reference {

/// Direct per-state evaluation without incremental updates. Serial; for cross-checking
/// enumerate_states on instances of up to 20 free bits.
EnergyResolvedSums enumerate_states(const Lattice &lat, const InteractionTable &table,
                                    const DisorderRealization &disorder);

}  // namespace reference

}  // namespace tscc
