#include <doctest.h>

#include <cmath>
#include <numbers>

#include "tscc/lattice.h"
#include "tscc/observables.h"
#include "tscc/rng.h"

using namespace tscc;

TEST_CASE("magnetization of uniform states") {
    Lattice lat = build_lattice(LatticeSpec::square(6));
    SpinState up(lat.spins.num_links(), lat.num_triangles());
    for (Color c : all_colors) {
        CHECK(magnetization(lat, up, c) == 1.0);
        auto f0 = fourier_amplitude(lat, up, c, WaveVectorChoice::Zero);
        CHECK(f0.real() == doctest::Approx(double(sublattice_members(lat, c).size())));
        CHECK(std::abs(f0.imag()) < 1e-12);
    }
    // Flipping links and two zz spins per triangle (code 3 flips corners 0 and 1).
    SpinState st = up;
    for (uint32_t i = 0; i < st.num_links(); ++i) {
        st.flip_link(i);
    }
    for (uint32_t t = 0; t < st.num_triangles(); ++t) {
        st.set_triangle_code(t, 3);
    }
    for (Color c : all_colors) {
        // Corner 2 of every triangle keeps +1.
        double expect = 0;
        auto members = sublattice_members(lat, c);
        for (uint32_t s : members) {
            expect += st.spin(s);
        }
        CHECK(magnetization(lat, st, c) == doctest::Approx(expect / members.size()));
    }
}

TEST_CASE("packed measurement agrees with the direct sums") {
    Lattice lat = build_lattice(LatticeSpec::square(9));
    ObservableKernel kernel(lat);
    Stream rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        SpinState st(lat.spins.num_links(), lat.num_triangles());
        st.randomize(rng);
        Measurement m = kernel.measure(st, 17);
        CHECK(m.energy == 17);
        for (Color c : all_colors) {
            int ci = static_cast<int>(c);
            auto f0 = fourier_amplitude(lat, st, c, WaveVectorChoice::Zero);
            auto fk = fourier_amplitude(lat, st, c, WaveVectorChoice::Min);
            CHECK(double(m.f0[ci]) == f0.real());
            CHECK(m.fk[ci].real() == doctest::Approx(fk.real()).epsilon(1e-9));
            CHECK(m.fk[ci].imag() == doctest::Approx(fk.imag()).epsilon(1e-9));
            // Direct phase sum.
            std::complex<double> direct;
            for (uint32_t s : sublattice_members(lat, c)) {
                direct += double(st.spin(s)) * std::polar(1.0, lat.k_min.phase(lat.spins.spins[s].position));
            }
            CHECK(std::abs(direct - fk) < 1e-9);
        }
    }
}

TEST_CASE("k_min phases are periodic on the torus") {
    Lattice lat = build_lattice(LatticeSpec::square(6));
    for (const auto &s : lat.spins.spins) {
        Vec2 shifted{s.position.u + 6, s.position.w};
        Vec2 up{s.position.u, s.position.w + 6};
        double d1 = lat.k_min.phase(shifted) - lat.k_min.phase(s.position);
        double d2 = lat.k_min.phase(up) - lat.k_min.phase(s.position);
        CHECK(std::remainder(d1, 2 * std::numbers::pi) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(std::remainder(d2, 2 * std::numbers::pi) == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("correlation length cases") {
    int L = 12;
    double s = 2 * std::sin(std::numbers::pi / L);
    auto ok = correlation_length(5.0, 1.0, L);
    CHECK(ok.status == XiStatus::Ok);
    CHECK(ok.xi == doctest::Approx(2.0 / s));
    auto equal = correlation_length(2.0, 2.0, L);
    CHECK(equal.xi == 0.0);
    CHECK(equal.status == XiStatus::Ok);
    auto neg = correlation_length(1.0, 2.0, L);
    CHECK(neg.status == XiStatus::NegativeRatio);
    CHECK(neg.xi == 0.0);
    auto div = correlation_length(3.0, 0.0, L);
    CHECK(div.status == XiStatus::Divergent);
    CHECK(std::isinf(div.xi));
    CHECK_THROWS_AS(correlation_length(1.0, -1.0, L), std::invalid_argument);
    CHECK_THROWS_AS(correlation_length(1.0, NAN, L), std::invalid_argument);
}

TEST_CASE("susceptibility over a recorded series") {
    MeasurementSeries series;
    series.class_size = {4, 4, 4};
    series.rungs.resize(1);
    for (int i = 0; i < 4; ++i) {
        SeriesRecord r;
        r.m = {0.5, i % 2 ? 1.0 : -1.0, 0.0};
        r.fk = {std::complex<double>(1, 1), {}, {}};
        series.append(r);
    }
    // chi(0) = N_P <m^2>, chi(k) = <|F(k)|^2> / N_P.
    CHECK(susceptibility(series, 0, Color::A, WaveVectorChoice::Zero) == doctest::Approx(1.0));
    CHECK(susceptibility(series, 0, Color::B, WaveVectorChoice::Zero) == doctest::Approx(4.0));
    CHECK(susceptibility(series, 0, Color::C, WaveVectorChoice::Zero) == 0.0);
    CHECK(susceptibility(series, 0, Color::A, WaveVectorChoice::Min) == doctest::Approx(0.5));
}

TEST_CASE("autocorrelation-aware error") {
    SUBCASE("constant series") {
        std::vector<double> x(100, 2.5);
        auto e = thermal_estimate(x);
        CHECK(e.mean == 2.5);
        CHECK(e.std_error == 0.0);
    }
    SUBCASE("independent draws") {
        Stream rng(1);
        std::vector<double> x(20000);
        for (double &v : x) {
            v = rng.normal();
        }
        auto e = thermal_estimate(x);
        CHECK(e.tau_int == doctest::Approx(0.5).epsilon(0.1));
        CHECK(e.std_error == doctest::Approx(1 / std::sqrt(20000.0)).epsilon(0.1));
    }
    SUBCASE("AR(1) series") {
        // tau_int = (1 + rho) / (2 (1 - rho)).
        const double rho = 0.8;
        Stream rng(2);
        std::vector<double> x(200000);
        double v = 0;
        for (double &xi : x) {
            v = rho * v + std::sqrt(1 - rho * rho) * rng.normal();
            xi = v;
        }
        auto e = thermal_estimate(x);
        CHECK(e.tau_int == doctest::Approx((1 + rho) / (2 * (1 - rho))).epsilon(0.1));
    }
    CHECK_THROWS(thermal_estimate(std::span<const double>{}));
}
