#include <doctest.h>

#include <cmath>

#include "toy_instances.h"
#include "tscc/lattice.h"
#include "tscc/model.h"
#include "tscc/rng.h"

using namespace tscc;

TEST_CASE("single-qubit commutation agrees with the symplectic form") {
    const Pauli all[] = {Pauli::I, Pauli::X, Pauli::Y, Pauli::Z};
    for (Pauli a : all) {
        for (Pauli b : all) {
            PauliString sa = PauliString::single(3, 1, a);
            PauliString sb = PauliString::single(3, 1, b);
            CHECK(sa.commutes(sb) == paulis_commute(a, b));
        }
    }
    // Two-qubit strings: commute iff the number of anticommuting positions is even.
    for (int code_a = 0; code_a < 16; ++code_a) {
        for (int code_b = 0; code_b < 16; ++code_b) {
            PauliString sa(70), sb(70);
            int anti = 0;
            for (int q = 0; q < 2; ++q) {
                Pauli pa = all[(code_a >> (2 * q)) & 3];
                Pauli pb = all[(code_b >> (2 * q)) & 3];
                sa.set(q == 0 ? 3 : 66, pa);
                sb.set(q == 0 ? 3 : 66, pb);
                anti += !paulis_commute(pa, pb);
            }
            CHECK(sa.commutes(sb) == (anti % 2 == 0));
        }
    }
}

TEST_CASE("pauli string set and get round trip across word boundaries") {
    PauliString s(130);
    const Pauli all[] = {Pauli::I, Pauli::X, Pauli::Y, Pauli::Z};
    for (uint32_t q = 0; q < 130; ++q) {
        s.set(q, all[(q * 7) % 4]);
    }
    for (uint32_t q = 0; q < 130; ++q) {
        CHECK(s.get(q) == all[(q * 7) % 4]);
    }
    CHECK(pauli_from_char('Y') == Pauli::Y);
    CHECK(pauli_name(Pauli::Z) == 'Z');
}

TEST_CASE("compiled terms pair the spins of each qubit") {
    Lattice lat = build_lattice(LatticeSpec::square(6));
    InteractionTable table = compile_interactions(lat);
    REQUIRE(table.terms.size() == 3 * lat.num_qubits());
    for (uint32_t j = 0; j < lat.num_qubits(); ++j) {
        auto [sx, sy, szz] = lat.spins.per_qubit[j];
        // sigma^x anticommutes with the Y link and both Z generators, and so on.
        auto sorted = [](uint32_t a, uint32_t b) { return std::array<uint32_t, 2>{std::min(a, b), std::max(a, b)}; };
        CHECK(table.terms[3 * j + 0].spins == sorted(sy, szz));
        CHECK(table.terms[3 * j + 1].spins == sorted(sx, szz));
        CHECK(table.terms[3 * j + 2].spins == sorted(sx, sy));
        CHECK(table.raw_terms[3 * j + 0].generators.size() == 3);
        CHECK(table.raw_terms[3 * j + 1].generators.size() == 3);
        CHECK(table.raw_terms[3 * j + 2].generators.size() == 2);
    }
}

TEST_CASE("a qubit with two links of the same kind does not compile") {
    Lattice lat = testing::toy_medium();
    for (auto &g : lat.generators) {
        if (g.kind == GeneratorKind::X) {
            g.kind = GeneratorKind::Y;
            break;
        }
    }
    CHECK_THROWS_AS(compile_interactions(lat), CompileError);
}

TEST_CASE("error labels map to coupling signs") {
    auto d = DisorderRealization::from_errors(0.1, 0, {Pauli::I, Pauli::X, Pauli::Y, Pauli::Z});
    CHECK(d.tau[0] == std::array<int8_t, 3>{1, 1, 1});
    CHECK(d.tau[1] == std::array<int8_t, 3>{1, -1, -1});
    CHECK(d.tau[2] == std::array<int8_t, 3>{-1, 1, -1});
    CHECK(d.tau[3] == std::array<int8_t, 3>{-1, -1, 1});
    for (const auto &t : d.tau) {
        CHECK(t[0] * t[1] * t[2] == 1);
    }
    auto back = DisorderRealization::deserialize(d.serialize());
    CHECK(back.errors == d.errors);
    CHECK(back.tau == d.tau);
    CHECK(back.p == d.p);
}

TEST_CASE("depolarizing sampler frequencies") {
    Lattice lat = build_lattice(LatticeSpec::square(24));
    const double p = 0.3;
    std::array<double, 4> count{};
    double total = 0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        auto d = sample_disorder(lat, p, seed);
        for (Pauli e : d.errors) {
            count[static_cast<int>(e)] += 1;
        }
        total += d.errors.size();
    }
    std::array<double, 4> expect{1 - p, p / 3, p / 3, p / 3};
    for (int k = 0; k < 4; ++k) {
        double sigma = std::sqrt(total * expect[k] * (1 - expect[k]));
        CHECK(std::abs(count[k] - total * expect[k]) < 5 * sigma);
    }
    CHECK(sample_disorder(lat, p, 3).errors == sample_disorder(lat, p, 3).errors);
    CHECK(sample_disorder(lat, p, 3).errors != sample_disorder(lat, p, 4).errors);
    auto clean = sample_disorder(lat, 0.0, 1);
    for (Pauli e : clean.errors) {
        CHECK(e == Pauli::I);
    }
}

TEST_CASE("energy matches a direct sum over qubits") {
    for (const Lattice &lat : {build_lattice(LatticeSpec::square(6)), testing::toy_medium()}) {
        InteractionTable table = compile_interactions(lat);
        Stream rng(5);
        for (int trial = 0; trial < 20; ++trial) {
            auto dis = sample_disorder(lat, 0.25, trial);
            SpinState st(lat.spins.num_links(), lat.num_triangles());
            st.randomize(rng);
            auto s = st.to_spins();
            int64_t direct = 0;
            for (uint32_t j = 0; j < lat.num_qubits(); ++j) {
                auto [sx, sy, szz] = lat.spins.per_qubit[j];
                const auto &t = dis.tau[j];
                direct -= t[0] * s[sy] * s[szz] + t[1] * s[sx] * s[szz] + t[2] * s[sx] * s[sy];
            }
            CHECK(energy(table, dis, s) == direct);
            CHECK(energy(table, dis, st) == direct);
        }
    }
}

TEST_CASE("ground state of the clean model") {
    Lattice lat = build_lattice(LatticeSpec::square(6));
    InteractionTable table = compile_interactions(lat);
    auto dis = sample_disorder(lat, 0.0, 0);
    SpinState st(lat.spins.num_links(), lat.num_triangles());
    CHECK(energy(table, dis, st) == -3 * int64_t{lat.num_qubits()});
}

TEST_CASE("Nishimori line") {
    // Closed form in long double as the reference.
    auto tn = [](long double p) { return 4.0L / std::log(3.0L * (1.0L - p) / p); };
    CHECK(std::abs(nishimori_temperature(0.055) - static_cast<double>(tn(0.055L))) < 1e-12);
    CHECK(std::abs(nishimori_temperature(0.048) - static_cast<double>(tn(0.048L))) < 1e-12);
    CHECK(nishimori_temperature(0.055) == doctest::Approx(1.0146).epsilon(1e-4));
    CHECK(nishimori_temperature(0.048) == doctest::Approx(0.9789).epsilon(1e-4));
    for (double p = 0.001; p < 0.74; p += 0.0137) {
        CHECK(std::abs(nishimori_probability(nishimori_temperature(p)) - p) < 1e-12);
        auto pt = nishimori_point(p);
        CHECK(std::abs(4 * pt.beta - std::log((1 - p) / (p / 3))) < 1e-12);
        CHECK(pt.beta * pt.temperature == doctest::Approx(1.0));
    }
    CHECK_THROWS(nishimori_temperature(0.0));
    CHECK_THROWS(nishimori_temperature(0.75));
}
