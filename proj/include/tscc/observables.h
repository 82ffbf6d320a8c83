#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "tscc/lattice.h"
#include "tscc/spin_state.h"

namespace tscc {

enum class WaveVectorChoice { Zero, Min };

/// m_P = (1 / N_P) sum_{i in P} s_i with N_P = |P|.
double magnetization(const Lattice &lat, const SpinState &state, Color color);

/// F_P(k) = sum_{i in P} s_i exp(i k . R_i).
std::complex<double> fourier_amplitude(const Lattice &lat, const SpinState &state, Color color, WaveVectorChoice k);
/// Same, for an explicit wave vector; only 0 and the lattice's k_min are supported.
std::complex<double> fourier_amplitude(const Lattice &lat, const SpinState &state, Color color, WaveVector k);

/// Snapshot of one replica. F_P(0) = N_P m_P is kept exact as an integer.
struct Measurement {
    int64_t energy = 0;
    std::array<int64_t, 3> f0{};
    std::array<std::complex<double>, 3> fk{};
};

/// Precomputed per-spin color and phase for fast measurement of packed states.
class ObservableKernel {
   public:
    explicit ObservableKernel(const Lattice &lat);

    Measurement measure(const SpinState &state, int64_t energy) const;
    const std::array<uint32_t, 3> &class_sizes() const {
        return class_size_;
    }
    uint32_t num_spins() const {
        return static_cast<uint32_t>(color_.size());
    }

   private:
    uint32_t num_links_;
    std::vector<uint8_t> color_;
    std::vector<std::complex<double>> phase_;
    std::array<uint32_t, 3> class_size_{};
    std::array<std::complex<double>, 3> phase_total_{};
};

struct SeriesRecord {
    uint64_t sweep = 0;
    uint32_t rung = 0;
    int64_t energy = 0;
    std::array<double, 3> m{};
    std::array<std::complex<double>, 3> fk{};
};

/// Per-rung measurement records.
struct MeasurementSeries {
    std::array<uint32_t, 3> class_size{};
    std::vector<std::vector<SeriesRecord>> rungs;

    void append(const SeriesRecord &r);
};

/// chi_m(k) = (1 / N_P) <|F_P(k)|^2> over the records of one rung.
double susceptibility(const MeasurementSeries &series, uint32_t rung, Color color, WaveVectorChoice k);

enum class XiStatus { Ok, NegativeRatio, Divergent };

struct CorrelationLength {
    double xi = 0;
    XiStatus status = XiStatus::Ok;
};

/// xi_L = sqrt(chi(0) / chi(k_min) - 1) / (2 sin(k_min / 2)) with k_min = 2 pi / L. Disorder-averaged
/// inputs. chi(0) < chi(k_min) yields 0 with NegativeRatio; chi(k_min) == 0 yields +inf with Divergent.
/// Throws std::invalid_argument for negative or non-finite chi(k_min).
CorrelationLength correlation_length(double chi0, double chik, int L);

/// Mean with autocorrelation-aware error: integrated autocorrelation time by automatic windowing.
struct ThermalEstimate {
    double mean = 0;
    double std_error = 0;
    double tau_int = 0.5;
    double effective_samples = 0;
};

ThermalEstimate thermal_estimate(std::span<const double> series);

}  // namespace tscc
