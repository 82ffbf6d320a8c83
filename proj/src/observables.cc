#include "tscc/observables.h"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tscc {

namespace {

void check_state(const Lattice &lat, const SpinState &state) {
    if (state.num_links() != lat.spins.num_links() || state.num_triangles() != lat.num_triangles()) {
        throw std::invalid_argument("spin state dimensions differ from the lattice");
    }
}

}  // namespace

double magnetization(const Lattice &lat, const SpinState &state, Color color) {
    check_state(lat, state);
    int64_t sum = 0;
    int64_t count = 0;
    for (uint32_t i = 0; i < lat.spins.size(); ++i) {
        if (lat.spins.spins[i].color == color) {
            sum += state.spin(i);
            ++count;
        }
    }
    return static_cast<double>(sum) / static_cast<double>(count);
}

std::complex<double> fourier_amplitude(const Lattice &lat, const SpinState &state, Color color, WaveVectorChoice k) {
    check_state(lat, state);
    WaveVector kv = k == WaveVectorChoice::Zero ? WaveVector{} : lat.k_min;
    std::complex<double> sum = 0;
    for (uint32_t i = 0; i < lat.spins.size(); ++i) {
        const SpinInfo &s = lat.spins.spins[i];
        if (s.color == color) {
            sum += static_cast<double>(state.spin(i)) * std::polar(1.0, kv.phase(s.position));
        }
    }
    return sum;
}

std::complex<double> fourier_amplitude(const Lattice &lat, const SpinState &state, Color color, WaveVector k) {
    if (k.ku == 0 && k.kw == 0) {
        return fourier_amplitude(lat, state, color, WaveVectorChoice::Zero);
    }
    if (k.ku == lat.k_min.ku && k.kw == lat.k_min.kw) {
        return fourier_amplitude(lat, state, color, WaveVectorChoice::Min);
    }
    throw std::invalid_argument("only k = 0 and k = k_min are supported");
}

ObservableKernel::ObservableKernel(const Lattice &lat) : num_links_(lat.spins.num_links()) {
    size_t ns = lat.spins.size();
    color_.resize(ns);
    phase_.resize(ns);
    for (size_t i = 0; i < ns; ++i) {
        const SpinInfo &s = lat.spins.spins[i];
        color_[i] = static_cast<uint8_t>(s.color);
        phase_[i] = std::polar(1.0, lat.k_min.phase(s.position));
        class_size_[color_[i]]++;
        phase_total_[color_[i]] += phase_[i];
    }
}

Measurement ObservableKernel::measure(const SpinState &state, int64_t energy) const {
    Measurement out;
    out.energy = energy;
    // Accumulate the -1 spins; F = (sum of all) - 2 (sum over flipped).
    std::array<int64_t, 3> down{0, 0, 0};
    std::array<std::complex<double>, 3> flipped{};
    auto visit = [&](uint32_t i, bool bit) {
        int c = color_[i];
        if (bit) {
            down[c]++;
            flipped[c] += phase_[i];
        }
    };
    for (uint32_t i = 0; i < num_links_; ++i) {
        visit(i, state.link_bit(i));
    }
    for (uint32_t t = 0; t < state.num_triangles(); ++t) {
        uint32_t code = state.triangle_code(t);
        for (uint32_t c = 0; c < 3; ++c) {
            visit(num_links_ + 3 * t + c, SpinState::zz_from_code(code, c));
        }
    }
    for (int c = 0; c < 3; ++c) {
        out.f0[c] = static_cast<int64_t>(class_size_[c]) - 2 * down[c];
        out.fk[c] = phase_total_[c] - 2.0 * flipped[c];
    }
    return out;
}

void MeasurementSeries::append(const SeriesRecord &r) {
    if (rungs.size() <= r.rung) {
        rungs.resize(r.rung + 1);
    }
    rungs[r.rung].push_back(r);
}

double susceptibility(const MeasurementSeries &series, uint32_t rung, Color color, WaveVectorChoice k) {
    if (rung >= series.rungs.size() || series.rungs[rung].empty()) {
        throw std::invalid_argument("susceptibility of an empty series");
    }
    int c = static_cast<int>(color);
    double np = series.class_size[c];
    double sum = 0;
    for (const SeriesRecord &r : series.rungs[rung]) {
        sum += k == WaveVectorChoice::Zero ? (np * r.m[c]) * (np * r.m[c]) : std::norm(r.fk[c]);
    }
    return sum / static_cast<double>(series.rungs[rung].size()) / np;
}

CorrelationLength correlation_length(double chi0, double chik, int L) {
    if (!std::isfinite(chik) || chik < 0 || !std::isfinite(chi0)) {
        throw std::invalid_argument("chi(k_min) must be finite and non-negative (got " + std::to_string(chik) + ")");
    }
    if (L <= 0) {
        throw std::invalid_argument("system size must be positive");
    }
    if (chik == 0) {
        return {std::numeric_limits<double>::infinity(), XiStatus::Divergent};
    }
    double ratio = chi0 / chik - 1;
    if (ratio < 0) {
        return {0.0, XiStatus::NegativeRatio};
    }
    double k_min = 2 * std::numbers::pi / L;
    return {std::sqrt(ratio) / (2 * std::sin(k_min / 2)), XiStatus::Ok};
}

ThermalEstimate thermal_estimate(std::span<const double> x) {
    ThermalEstimate out;
    size_t n = x.size();
    if (n == 0) {
        throw std::invalid_argument("thermal estimate of an empty series");
    }
    double mean = 0;
    for (double v : x) {
        mean += v;
    }
    mean /= static_cast<double>(n);
    out.mean = mean;
    double c0 = 0;
    for (double v : x) {
        c0 += (v - mean) * (v - mean);
    }
    c0 /= static_cast<double>(n);
    if (n < 2 || c0 == 0) {
        out.effective_samples = static_cast<double>(n);
        return out;
    }
    // Sokal's automatic window: smallest W with W >= 6 tau_int(W).
    double tau = 0.5;
    for (size_t t = 1; t < n; ++t) {
        double ct = 0;
        for (size_t i = 0; i + t < n; ++i) {
            ct += (x[i] - mean) * (x[i + t] - mean);
        }
        ct /= static_cast<double>(n - t);
        tau += ct / c0;
        if (static_cast<double>(t) >= 6 * tau) {
            break;
        }
    }
    tau = std::max(tau, 0.5);
    out.tau_int = tau;
    out.effective_samples = static_cast<double>(n) / (2 * tau);
    out.std_error = std::sqrt(c0 * 2 * tau / static_cast<double>(n));
    return out;
}

}  // namespace tscc
