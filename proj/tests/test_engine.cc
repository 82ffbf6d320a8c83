#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "toy_instances.h"
#include "tscc/engine.h"
#include "tscc/lattice.h"
#include "tscc/model.h"
#include "tscc/parallel.h"

using namespace tscc;

namespace {

struct Instance {
    Lattice lat;
    InteractionTable table;
    DisorderRealization dis;
    Instance(Lattice l, double p, uint64_t seed)
        : lat(std::move(l)), table(compile_interactions(lat)), dis(sample_disorder(lat, p, seed)) {}
};

void set_threads(int n) {
#ifdef _OPENMP
    omp_set_num_threads(n);
#else
    (void)n;
#endif
}

}  // namespace

TEST_CASE("local energy changes match a full recompute") {
    for (Instance in : {Instance(build_lattice(LatticeSpec::square(6)), 0.2, 1), Instance(testing::toy_medium(), 0.3, 2)}) {
        SweepKernel kernel(in.table, in.dis);
        Stream rng(4);
        for (int trial = 0; trial < 5; ++trial) {
            SpinState st(kernel.num_links(), kernel.num_triangles());
            st.randomize(rng);
            int64_t e = energy(in.table, in.dis, st);
            CHECK(kernel.energy(st) == e);
            for (uint32_t i = 0; i < kernel.num_links(); ++i) {
                SpinState f = st;
                f.flip_link(i);
                int d = kernel.link_delta(st, i);
                CHECK(energy(in.table, in.dis, f) - e == d);
                CHECK((d == -8 || d == -4 || d == 0 || d == 4 || d == 8));
            }
            for (uint32_t t = 0; t < kernel.num_triangles(); ++t) {
                for (uint32_t d = 1; d <= 3; ++d) {
                    SpinState f = st;
                    f.toggle_triangle(t, d);
                    CHECK(energy(in.table, in.dis, f) - e == kernel.triangle_delta(st, t, d));
                }
            }
        }
    }
}

TEST_CASE("triangle codes encode exactly the even-parity zz patterns") {
    std::set<std::array<bool, 3>> patterns;
    for (uint32_t code = 0; code < 4; ++code) {
        std::array<bool, 3> z{SpinState::zz_from_code(code, 0), SpinState::zz_from_code(code, 1),
                              SpinState::zz_from_code(code, 2)};
        CHECK((z[0] ^ z[1] ^ z[2]) == false);
        patterns.insert(z);
        for (uint32_t d = 1; d <= 3; ++d) {
            int flipped = 0;
            for (uint32_t c = 0; c < 3; ++c) {
                flipped += SpinState::zz_from_code(code, c) != SpinState::zz_from_code(code ^ d, c);
            }
            CHECK(flipped == 2);
        }
    }
    CHECK(patterns.size() == 4);
    SpinState st(5, 40);
    Stream rng(1);
    st.randomize(rng);
    CHECK(SpinState::from_spins(st.to_spins(), 5, 40) == st);
}

TEST_CASE("packed kernel and unpacked reference are bit-identical") {
    Instance in(build_lattice(LatticeSpec::square(6)), 0.1, 3);
    SweepKernel kernel(in.table, in.dis);
    reference::ReferenceSweeper ref(in.table, in.dis);
    for (double beta : {0.0, 0.3, 0.8, 2.0}) {
        Stream init(7);
        SpinState packed(kernel.num_links(), kernel.num_triangles());
        packed.randomize(init);
        std::vector<int8_t> spins = packed.to_spins();
        Stream r1(99), r2(99);
        int64_t e1 = kernel.energy(packed);
        int64_t e2 = ref.energy(spins);
        CHECK(e1 == e2);
        AcceptanceTable acc(beta);
        for (int s = 0; s < 50; ++s) {
            uint64_t a1 = kernel.sweep(packed, acc, r1, e1);
            uint64_t a2 = ref.sweep(spins, beta, r2, e2);
            REQUIRE(a1 == a2);
        }
        CHECK(packed.to_spins() == spins);
        CHECK(e1 == e2);
        CHECK(e1 == energy(in.table, in.dis, packed));
        CHECK(r1 == r2);
    }
}

TEST_CASE("infinite temperature accepts every proposal") {
    Instance in(build_lattice(LatticeSpec::square(6)), 0.1, 3);
    SweepKernel kernel(in.table, in.dis);
    SpinState st(kernel.num_links(), kernel.num_triangles());
    Stream rng(1);
    int64_t e = kernel.energy(st);
    AcceptanceTable acc(0.0);
    for (int s = 0; s < 5; ++s) {
        CHECK(kernel.sweep(st, acc, rng, e) == kernel.num_links() + kernel.num_triangles());
    }
    CHECK(e == kernel.energy(st));
}

TEST_CASE("acceptance table") {
    AcceptanceTable acc(0.7);
    CHECK(acc.for_delta(-8) == 1.0);
    CHECK(acc.for_delta(0) == 1.0);
    CHECK(acc.for_delta(4) == doctest::Approx(std::exp(-2.8)));
    CHECK(acc.for_delta(8) == doctest::Approx(std::exp(-5.6)));
    Stream rng(3);
    int n = 200000, hits = 0;
    for (int i = 0; i < n; ++i) {
        hits += acc.accept(4, rng);
    }
    double p = std::exp(-2.8);
    CHECK(std::abs(hits - n * p) < 5 * std::sqrt(n * p * (1 - p)));
}

TEST_CASE("geometric ladder") {
    auto l = TemperatureLadder::geometric(0.9, 2.2, 32);
    REQUIRE(l.size() == 32);
    CHECK(l.temperatures.front() == 0.9);
    CHECK(l.temperatures.back() == 2.2);
    double ratio = l.temperatures[1] / l.temperatures[0];
    for (uint32_t r = 1; r < 32; ++r) {
        CHECK(l.temperatures[r] / l.temperatures[r - 1] == doctest::Approx(ratio));
        CHECK(l.betas[r] < l.betas[r - 1]);
        CHECK(l.betas[r] * l.temperatures[r] == doctest::Approx(1.0));
    }
    CHECK_THROWS(TemperatureLadder::geometric(2.0, 1.0, 4));
    CHECK_THROWS(TemperatureLadder::from_temperatures({1.0, 1.0}));
}

TEST_CASE("replica exchange keeps a permutation and consistent energies") {
    Instance in(build_lattice(LatticeSpec::square(6)), 0.05, 5);
    SweepKernel kernel(in.table, in.dis);
    ReplicaEnsemble ens(kernel, TemperatureLadder::geometric(0.8, 2.5, 8), 11);
    for (int s = 0; s < 200; ++s) {
        ens.sweep_all(kernel);
        pt_swap_pass(ens);
    }
    std::vector<uint32_t> sorted = ens.perm;
    std::sort(sorted.begin(), sorted.end());
    std::vector<uint32_t> iota(8);
    std::iota(iota.begin(), iota.end(), 0);
    CHECK(sorted == iota);
    for (uint32_t r = 0; r < 8; ++r) {
        CHECK(ens.energy_at(r) == kernel.energy(ens.state_at(r)));
    }
    // Each pair is attempted every other pass.
    for (uint32_t r = 0; r + 1 < 8; ++r) {
        CHECK(ens.swap_attempts[r] == 100);
        CHECK(ens.swap_accepts[r] > 0);
    }
}

TEST_CASE("swaps between equal temperatures always succeed") {
    Instance in(testing::toy_medium(), 0.1, 1);
    SweepKernel kernel(in.table, in.dis);
    ReplicaEnsemble ens(kernel, TemperatureLadder::from_temperatures({1.0, 1.5, 2.0}), 1);
    ens.ladder.betas = {1.0, 1.0, 0.5};
    pt_swap_pass(ens);
    CHECK(ens.swap_accepts[0] == 1);
    CHECK(ens.perm[0] == 1);
}

TEST_CASE("ensemble results do not depend on the thread count") {
    Instance in(build_lattice(LatticeSpec::square(6)), 0.05, 5);
    SweepKernel kernel(in.table, in.dis);
    auto run = [&](int threads) {
        set_threads(threads);
        ReplicaEnsemble ens(kernel, TemperatureLadder::geometric(0.8, 2.5, 6), 3);
        for (int s = 0; s < 40; ++s) {
            ens.sweep_all(kernel);
            pt_swap_pass(ens);
        }
        set_threads(1);
        return ens;
    };
    ReplicaEnsemble a = run(1), b = run(4);
    CHECK(a.replicas == b.replicas);
    CHECK(a.perm == b.perm);
    CHECK(a.energies == b.energies);
    CHECK(a.rung_streams == b.rung_streams);
}

TEST_CASE("tracker bins are logarithmic") {
    EquilibrationTracker tr(1);
    for (uint64_t s = 1; s <= 100; ++s) {
        double v = static_cast<double>(s);
        tr.add(s, std::span<const double>(&v, 1));
    }
    CHECK(tr.complete_bins() == 6);
    const auto &bins = tr.bins(0);
    for (uint32_t b = 0; b < 6; ++b) {
        CHECK(bins[b].count == (uint64_t{1} << b));
        double lo = double(uint64_t{1} << b), hi = double((uint64_t{2} << b) - 1);
        CHECK(bins[b].mean() == doctest::Approx((lo + hi) / 2));
    }
    double v = 0;
    CHECK_THROWS(tr.add(102, std::span<const double>(&v, 1)));
}

TEST_CASE("equilibration verdicts on synthetic series") {
    auto feed = [](auto f, uint64_t n) {
        EquilibrationTracker tr(1);
        Stream rng(5);
        for (uint64_t s = 1; s <= n; ++s) {
            double v = f(s, rng);
            tr.add(s, std::span<const double>(&v, 1));
        }
        return tr;
    };
    SUBCASE("too short") {
        auto tr = feed([](uint64_t, Stream &) { return 1.0; }, 6);
        CHECK(is_equilibrated(tr, 2.0) == EquilibrationStatus::Undecided);
    }
    SUBCASE("stationary noise") {
        auto tr = feed([](uint64_t, Stream &r) { return r.normal(); }, (1 << 12) - 1);
        CHECK(is_equilibrated(tr, 2.0) == EquilibrationStatus::Equilibrated);
    }
    SUBCASE("constant") {
        auto tr = feed([](uint64_t, Stream &) { return -3.0; }, (1 << 10) - 1);
        CHECK(is_equilibrated(tr, 2.0) == EquilibrationStatus::Equilibrated);
    }
    SUBCASE("slow relaxation") {
        auto tr = feed([](uint64_t s, Stream &r) { return 10.0 / std::sqrt(double(s)) + 0.1 * r.normal(); }, (1 << 12) - 1);
        CHECK(is_equilibrated(tr, 2.0) == EquilibrationStatus::NotEquilibrated);
    }
    SUBCASE("block error sees autocorrelation") {
        // AR(1) with tau_int ~ 50: sub-block errors must exceed the naive sigma / sqrt(count).
        const double rho = 0.98;
        double x = 0;
        auto tr = feed(
            [&](uint64_t, Stream &r) {
                x = rho * x + std::sqrt(1 - rho * rho) * r.normal();
                return x;
            },
            (1 << 14) - 1);
        const auto &bin = tr.bins(0)[13];
        CHECK(bin.std_error() > 3.0 / std::sqrt(double(bin.count)));
    }
}

TEST_CASE("sample runner checkpoint and resume") {
    Instance in(testing::toy_medium(), 0.1, 4);
    RunSettings st;
    st.b = 7;
    st.measurement_interval = 2;
    st.record_series = true;
    auto ladder = TemperatureLadder::geometric(0.8, 2.0, 4);

    SampleRunner full(in.lat, in.table, in.dis, ladder, st, 77);
    full.run_to_completion();
    CHECK(full.finished());
    CHECK(full.sweeps_done() == 2 * full.result().equilibration_sweeps);

    SUBCASE("round trip mid equilibration and mid measurement") {
        for (uint64_t cut : {uint64_t{50}, full.sweeps_done() - 10}) {
            SampleRunner a(in.lat, in.table, in.dis, ladder, st, 77);
            a.advance(cut);
            auto bytes = a.checkpoint();
            SampleRunner b(in.lat, in.table, in.dis, ladder, st, 77);
            b.restore(bytes);
            CHECK(b.checkpoint() == bytes);
            b.run_to_completion();
            CHECK(b.checkpoint() == full.checkpoint());
            CHECK(b.series().rungs.size() == full.series().rungs.size());
        }
    }
    SUBCASE("file round trip") {
        auto path = std::filesystem::temp_directory_path() / "tscc_test_ckpt.bin";
        SampleRunner a(in.lat, in.table, in.dis, ladder, st, 77);
        a.advance(64);
        a.save_checkpoint(path.string());
        SampleRunner b(in.lat, in.table, in.dis, ladder, st, 77);
        b.load_checkpoint(path.string());
        b.run_to_completion();
        CHECK(b.checkpoint() == full.checkpoint());
        std::filesystem::remove(path);
    }
    SUBCASE("finished runs restore as finished") {
        SampleRunner b(in.lat, in.table, in.dis, ladder, st, 77);
        b.restore(full.checkpoint());
        CHECK(b.finished());
        CHECK(b.advance(10) == 0);
    }
    SUBCASE("corrupt or mismatched input is rejected without side effects") {
        SampleRunner a(in.lat, in.table, in.dis, ladder, st, 77);
        a.advance(40);
        auto bytes = a.checkpoint();
        SampleRunner b(in.lat, in.table, in.dis, ladder, st, 77);
        b.advance(3);
        auto before = b.checkpoint();
        for (size_t pos : {size_t{0}, bytes.size() / 2, bytes.size() - 1}) {
            auto bad = bytes;
            bad[pos] ^= 0x10;
            CHECK_THROWS_AS(b.restore(bad), CheckpointError);
        }
        auto truncated = bytes;
        truncated.resize(bytes.size() - 9);
        CHECK_THROWS_AS(b.restore(truncated), CheckpointError);
        SampleRunner other_seed(in.lat, in.table, in.dis, ladder, st, 78);
        CHECK_THROWS_AS(other_seed.restore(bytes), CheckpointError);
        auto other_dis = sample_disorder(in.lat, 0.1, 5);
        SampleRunner other(in.lat, in.table, other_dis, ladder, st, 77);
        if (other_dis.errors != in.dis.errors) {
            CHECK_THROWS_AS(other.restore(bytes), CheckpointError);
        }
        CHECK(b.checkpoint() == before);
    }
}

TEST_CASE("sample runs are reproducible and honour the cap") {
    Instance in(build_lattice(LatticeSpec::square(6)), 0.05, 9);
    RunSettings st;
    st.b = 6;
    st.cap_extra = 2;
    auto ladder = TemperatureLadder::geometric(1.0, 2.2, 4);
    auto a = run_sample(in.lat, in.dis, ladder, st, 5);
    auto b = run_sample(in.lat, in.dis, ladder, st, 5);
    CHECK(a.result.status != SampleStatus::Running);
    CHECK(a.result.equilibration_sweeps >= 64);
    CHECK(a.result.equilibration_sweeps <= 256);
    CHECK(a.result.total_sweeps == 2 * a.result.equilibration_sweeps);
    CHECK(a.result.rungs[0].energy == b.result.rungs[0].energy);
    CHECK(a.result.rungs[3].fk_sq == b.result.rungs[3].fk_sq);
    for (const auto &r : a.result.rungs) {
        CHECK(r.count == a.result.equilibration_sweeps / st.measurement_interval);
    }
    st.extend_equilibration = false;
    auto c = run_sample(in.lat, in.dis, ladder, st, 5);
    CHECK(c.result.equilibration_sweeps == 64);
    CHECK(c.result.status == SampleStatus::Done);
}
