#pragma once

// Observable tables with a planted crossing. Curves follow xi/L = 0.6 - 0.25 tanh(L^(1/nu) (T - Tc) / 4),
// so every pair of sizes crosses exactly at Tc. Samples come in mirrored pairs around the target
// susceptibilities, so the disorder average hits the target exactly while the bootstrap sees spread.

#include <cmath>
#include <numbers>

#include "tscc/analysis.h"
#include "tscc/model.h"
#include "tscc/rng.h"

namespace tscc::testing {

inline double planted_xi_over_L(int L, double T, double Tc, double nu = 1.0) {
    return 0.6 - 0.25 * std::tanh(std::pow(double(L), 1.0 / nu) * (T - Tc) / 4.0);
}

inline DisorderEnsemble planted_ensemble(double p, int L, std::vector<double> temps, uint32_t pairs, double Tc,
                                         double noise, uint64_t seed, double nu = 1.0) {
    DisorderEnsemble ens;
    ens.p = p;
    ens.L = L;
    ens.temperatures = temps;
    Stream rng(hash_words({seed, double_bits(p), uint64_t(L)}));
    double s = 2 * std::sin(std::numbers::pi / L);
    for (uint32_t k = 0; k < pairs; ++k) {
        SampleObservables a, b;
        a.index = 2 * k;
        b.index = 2 * k + 1;
        for (double T : temps) {
            double y = planted_xi_over_L(L, T, Tc, nu);
            double ratio = 1 + (y * L * s) * (y * L * s);
            std::array<double, 3> c0a{}, c0b{}, cka{}, ckb{};
            for (int c = 0; c < 3; ++c) {
                double chik = 2.0;
                double chi0 = ratio * chik;
                double e0 = noise * rng.normal() * chi0;
                double ek = noise * rng.normal() * chik;
                c0a[c] = chi0 + e0;
                c0b[c] = chi0 - e0;
                cka[c] = chik + ek;
                ckb[c] = chik - ek;
            }
            a.chi0.push_back(c0a);
            b.chi0.push_back(c0b);
            a.chik.push_back(cka);
            b.chik.push_back(ckb);
            a.energy.push_back(-T);
            b.energy.push_back(-T);
            a.m2.push_back({0.1, 0.1, 0.1});
            b.m2.push_back({0.1, 0.1, 0.1});
        }
        ens.samples.push_back(std::move(a));
        ens.samples.push_back(std::move(b));
    }
    return ens;
}

// Linear boundary from (0, 1.65) through the Nishimori line at p_c.
inline double planted_boundary(double p, double p_c) {
    double tn = nishimori_temperature(p_c);
    return 1.65 + (tn - 1.65) * p / p_c;
}

inline std::vector<double> linspace(double a, double b, uint32_t n) {
    std::vector<double> out(n);
    for (uint32_t k = 0; k < n; ++k) {
        out[k] = a + (b - a) * k / (n - 1);
    }
    return out;
}

}  // namespace tscc::testing
