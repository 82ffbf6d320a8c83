#include <doctest.h>

#include <cmath>
#include <complex>

#include "toy_instances.h"
#include "tscc/exact.h"
#include "tscc/lattice.h"
#include "tscc/model.h"

using namespace tscc;

namespace {

// Independent Boltzmann sums by walking every (link bits, triangle codes) assignment.
struct BruteForce {
    double Z = 0, E = 0;
    std::array<double, 3> chi0{}, chik{}, m2{};
};

BruteForce brute_force(const Lattice &lat, const InteractionTable &table, const DisorderRealization &dis, double beta) {
    uint32_t nl = lat.spins.num_links();
    uint32_t nt = lat.num_triangles();
    uint32_t bits = nl + 2 * nt;
    std::array<uint32_t, 3> size{};
    for (const auto &s : lat.spins.spins) {
        size[static_cast<int>(s.color)]++;
    }
    // Shift by the ground-state scale to keep weights finite.
    double shift = -3.0 * lat.num_qubits();
    BruteForce out;
    for (uint64_t x = 0; x < (uint64_t{1} << bits); ++x) {
        SpinState st(nl, nt);
        for (uint32_t i = 0; i < nl; ++i) {
            st.set_link(i, (x >> i) & 1);
        }
        for (uint32_t t = 0; t < nt; ++t) {
            st.set_triangle_code(t, (x >> (nl + 2 * t)) & 3);
        }
        double e = static_cast<double>(energy(table, dis, st));
        double w = std::exp(-beta * (e - shift));
        std::array<double, 3> f0{};
        std::array<std::complex<double>, 3> fk{};
        for (uint32_t i = 0; i < lat.spins.size(); ++i) {
            int c = static_cast<int>(lat.spins.spins[i].color);
            f0[c] += st.spin(i);
            fk[c] += double(st.spin(i)) * std::polar(1.0, lat.k_min.phase(lat.spins.spins[i].position));
        }
        out.Z += w;
        out.E += w * e;
        for (int c = 0; c < 3; ++c) {
            out.chi0[c] += w * f0[c] * f0[c] / size[c];
            out.chik[c] += w * std::norm(fk[c]) / size[c];
            out.m2[c] += w * f0[c] * f0[c] / (double(size[c]) * size[c]);
        }
    }
    out.E /= out.Z;
    for (int c = 0; c < 3; ++c) {
        out.chi0[c] /= out.Z;
        out.chik[c] /= out.Z;
        out.m2[c] /= out.Z;
    }
    return out;
}

}  // namespace

TEST_CASE("enumeration agrees with a direct Boltzmann sum") {
    Lattice lat = testing::toy_small();
    InteractionTable table = compile_interactions(lat);
    for (uint64_t seed : {1, 2, 3}) {
        auto dis = sample_disorder(lat, 0.3, seed);
        auto sums = enumerate_states(lat, table, dis);
        for (double beta : {0.0, 0.4, 1.0}) {
            ExactThermal ex = sums.at(beta);
            BruteForce bf = brute_force(lat, table, dis, beta);
            CHECK(ex.energy == doctest::Approx(bf.E).epsilon(1e-10));
            for (int c = 0; c < 3; ++c) {
                CHECK(ex.chi0[c] == doctest::Approx(bf.chi0[c]).epsilon(1e-10));
                CHECK(ex.chik[c] == doctest::Approx(bf.chik[c]).epsilon(1e-10));
                CHECK(ex.m2[c] == doctest::Approx(bf.m2[c]).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("Gray-code enumeration matches the per-state reference") {
    for (const Lattice &lat : {testing::toy_small(), testing::toy_medium()}) {
        InteractionTable table = compile_interactions(lat);
        auto dis = sample_disorder(lat, 0.2, 9);
        auto fast = enumerate_states(lat, table, dis);
        auto slow = reference::enumerate_states(lat, table, dis);
        CHECK(fast.count == slow.count);
        CHECK(fast.sum_f0 == slow.sum_f0);
        CHECK(fast.sum_f0_sq == slow.sum_f0_sq);
        for (size_t k = 0; k < fast.count.size(); ++k) {
            for (int c = 0; c < 3; ++c) {
                CHECK(fast.sum_fk_sq[k][c] == doctest::Approx(slow.sum_fk_sq[k][c]).epsilon(1e-9));
            }
        }
        uint64_t total = 0;
        for (auto [e, n] : fast.spectrum()) {
            total += n;
        }
        CHECK(total == uint64_t{1} << lat.num_free_bits());
    }
}

TEST_CASE("infinite temperature and symmetry") {
    Lattice lat = testing::toy_medium();
    InteractionTable table = compile_interactions(lat);
    auto dis = sample_disorder(lat, 0.3, 4);
    auto sums = enumerate_states(lat, table, dis);
    ExactThermal hot = sums.at(0.0);
    CHECK(std::abs(hot.energy) < 1e-12);
    for (int c = 0; c < 3; ++c) {
        // Spins of one class are independent and unbiased at beta = 0.
        CHECK(hot.chi0[c] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(hot.chik[c] == doctest::Approx(1.0).epsilon(1e-12));
    }
    for (double beta : {0.3, 1.0, 2.5}) {
        ExactThermal ex = sums.at(beta);
        for (int c = 0; c < 3; ++c) {
            CHECK(std::abs(ex.m[c]) < 1e-12);
            CHECK(ex.m2[c] > 0);
        }
        CHECK(ex.energy_sq >= ex.energy * ex.energy - 1e-9);
    }
}

TEST_CASE("gauge fixing preserves the spectrum up to 2^T") {
    for (const Lattice &lat : {testing::toy_small(), testing::toy_medium()}) {
        InteractionTable table = compile_interactions(lat);
        for (uint64_t seed = 0; seed < 5; ++seed) {
            auto dis = sample_disorder(lat, 0.25, seed);
            GaugeFixingReport r = verify_gauge_fixing(lat, table, dis);
            CHECK_MESSAGE(r.equivalent, r.first_mismatch);
            CHECK(r.degeneracy_factor == uint64_t{1} << lat.num_triangles());
        }
    }
}

TEST_CASE("a broken compile is caught by the gauge-fixing check") {
    Lattice lat = testing::toy_small();
    InteractionTable table = compile_interactions(lat);
    auto dis = sample_disorder(lat, 0.0, 0);
    // Retarget one gauge-fixed term to the wrong zz spin.
    table.terms[0].spins[1] = lat.spins.zz_spin(1);
    CHECK_FALSE(verify_gauge_fixing(lat, table, dis).equivalent);
}

TEST_CASE("enumeration refuses large instances") {
    Lattice lat = build_lattice(LatticeSpec::square(3));
    InteractionTable table = compile_interactions(lat);
    auto dis = sample_disorder(lat, 0.1, 0);
    CHECK_THROWS_AS(enumerate_states(lat, table, dis), EnumerationTooLarge);
}
