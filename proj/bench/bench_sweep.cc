// Sweep throughput: unpacked reference vs bit-packed kernel vs the full PT ensemble, serial and
// with OpenMP over rungs.
#include <benchmark/benchmark.h>

#include <map>

#include "tscc/engine.h"
#include "tscc/lattice.h"
#include "tscc/model.h"
#include "tscc/parallel.h"

namespace {

struct Instance {
    tscc::Lattice lat;
    tscc::InteractionTable table;
    tscc::DisorderRealization disorder;

    explicit Instance(int L, double p = 0.048)
        : lat(tscc::build_lattice(tscc::LatticeSpec::square(L))),
          table(tscc::compile_interactions(lat)),
          disorder(tscc::sample_disorder(lat, p, 7)) {}
};

const Instance &instance(int L) {
    static std::map<int, Instance> cache;
    auto it = cache.find(L);
    if (it == cache.end()) {
        it = cache.emplace(L, Instance(L)).first;
    }
    return it->second;
}

void BM_ReferenceSweep(benchmark::State &st) {
    const Instance &in = instance(static_cast<int>(st.range(0)));
    tscc::reference::ReferenceSweeper ref(in.table, in.disorder);
    tscc::Stream rng(1);
    std::vector<int8_t> spins(in.table.num_spins, 1);
    int64_t e = ref.energy(spins);
    for (auto _ : st) {
        benchmark::DoNotOptimize(ref.sweep(spins, 1.0, rng, e));
    }
    st.counters["moves/s"] = benchmark::Counter(
        static_cast<double>(st.iterations()) * (in.table.num_links() + in.table.num_triangles()),
        benchmark::Counter::kIsRate);
}

void BM_PackedSweep(benchmark::State &st) {
    const Instance &in = instance(static_cast<int>(st.range(0)));
    tscc::SweepKernel kernel(in.table, in.disorder);
    tscc::AcceptanceTable acc(1.0);
    tscc::Stream rng(1);
    tscc::SpinState s(in.table.num_links(), in.table.num_triangles());
    int64_t e = kernel.energy(s);
    for (auto _ : st) {
        benchmark::DoNotOptimize(kernel.sweep(s, acc, rng, e));
    }
    st.counters["moves/s"] = benchmark::Counter(
        static_cast<double>(st.iterations()) * (in.table.num_links() + in.table.num_triangles()),
        benchmark::Counter::kIsRate);
}

void ensemble_bench(benchmark::State &st, bool parallel) {
    const Instance &in = instance(static_cast<int>(st.range(0)));
    tscc::SweepKernel kernel(in.table, in.disorder);
    tscc::ReplicaEnsemble ens(kernel, tscc::TemperatureLadder::geometric(0.9, 2.2, 32), 3);
    for (auto _ : st) {
        if (parallel) {
            ens.sweep_all(kernel);
        } else {
            // Rungs one after another on the calling thread.
            TSCC_OMP(parallel num_threads(1))
            ens.sweep_all(kernel);
        }
        tscc::pt_swap_pass(ens);
    }
    st.counters["threads"] = parallel ? tscc::max_threads() : 1;
}

void BM_EnsembleSerial(benchmark::State &st) {
    ensemble_bench(st, false);
}
void BM_EnsembleOpenMP(benchmark::State &st) {
    ensemble_bench(st, true);
}

}  // namespace

BENCHMARK(BM_ReferenceSweep)->Arg(9)->Arg(18);
BENCHMARK(BM_PackedSweep)->Arg(9)->Arg(18)->Arg(24);
BENCHMARK(BM_EnsembleSerial)->Arg(9)->Arg(12);
BENCHMARK(BM_EnsembleOpenMP)->Arg(9)->Arg(12);

BENCHMARK_MAIN();
