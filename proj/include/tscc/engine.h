#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tscc/lattice.h"
#include "tscc/model.h"
#include "tscc/observables.h"
#include "tscc/rng.h"
#include "tscc/spin_state.h"

namespace tscc {

/// Temperatures ascending, betas descending; rung 0 is the coldest.
struct TemperatureLadder {
    std::vector<double> temperatures;
    std::vector<double> betas;

    /// Geometric spacing in T with endpoints exactly t_min and t_max.
    static TemperatureLadder geometric(double t_min, double t_max, uint32_t count);
    static TemperatureLadder from_temperatures(std::vector<double> temperatures);

    uint32_t size() const {
        return static_cast<uint32_t>(betas.size());
    }
};

/// Metropolis acceptance of a move with Boltzmann factor `prob`. Draws a random number only when
/// prob < 1, so the packed kernel and the reference consume their streams identically.
inline bool metropolis_accept(double prob, Stream &rng) {
    if (prob >= 1.0) {
        return true;
    }
    // prob * 2^64 < 2^64; the comparison on raw words avoids a float conversion per draw.
    uint64_t threshold = static_cast<uint64_t>(prob * 0x1.0p64);
    return rng.next_u64() < threshold;
}

/// Boltzmann factors for the two positive energy changes a local move can produce (+4 J, +8 J).
struct AcceptanceTable {
    double beta = 0;
    std::array<double, 2> prob{1.0, 1.0};
    // Same test as metropolis_accept on precomputed integer thresholds.
    std::array<uint64_t, 2> threshold{};
    std::array<bool, 2> always{true, true};

    explicit AcceptanceTable(double beta = 0);
    double for_delta(int delta) const {
        return delta <= 0 ? 1.0 : prob[(delta >> 2) - 1];
    }
    bool accept(int delta, Stream &rng) const {
        if (delta <= 0) {
            return true;
        }
        int k = (delta >> 2) - 1;
        return always[k] || rng.next_u64() < threshold[k];
    }
};

/// Couplings of one disorder realization baked into per-move neighbor lists. Every local move
/// (one link spin, or a pair of zz spins of one triangle) touches exactly four terms, and the energy
/// change is 8 - 4 * (number of currently unsatisfied terms among them).
class SweepKernel {
   public:
    SweepKernel(const InteractionTable &table, const DisorderRealization &disorder);

    uint32_t num_links() const {
        return num_links_;
    }
    uint32_t num_triangles() const {
        return static_cast<uint32_t>(triangle_nb_.size());
    }

    int64_t energy(const SpinState &state) const;

    /// Energy change of flipping link spin i.
    int link_delta(const SpinState &state, uint32_t i) const;
    /// Energy change of XOR-ing triangle t's code with d in {1, 2, 3}.
    int triangle_delta(const SpinState &state, uint32_t t, uint32_t d) const;

    /// One attempted update per link spin (in index order), then one per triangle, proposing a
    /// uniformly chosen different zz pattern. Returns the number of accepted moves and keeps
    /// `energy` current.
    uint64_t sweep(SpinState &state, const AcceptanceTable &acc, Stream &rng, int64_t &energy) const;

   private:
    // Other spin of a term: a link index, or kZZ | (triangle << 2) | corner.
    static constexpr uint32_t kZZ = 1u << 31;
    struct Neighbor {
        uint32_t ref;
        uint32_t tau;  // 1 if tau = -1
    };
    static uint32_t read_zz(const uint64_t *tris, uint32_t ref) {
        uint32_t t = (ref & ~kZZ) >> 2;
        uint32_t code = static_cast<uint32_t>(tris[t >> 5] >> (2 * (t & 31))) & 3;
        // Bit `code` of the corner's nibble is its zz bit.
        return (0b011011001010u >> (4 * (ref & 3) + code)) & 1;
    }
    static uint32_t read_link(const uint64_t *links, uint32_t ref) {
        return static_cast<uint32_t>(links[ref >> 6] >> (ref & 63)) & 1;
    }
    static uint32_t read(const uint64_t *links, const uint64_t *tris, uint32_t ref) {
        return (ref & kZZ) ? read_zz(tris, ref) : read_link(links, ref);
    }
    bool bit(const SpinState &s, uint32_t spin) const {
        return spin < num_links_ ? s.link_bit(spin) : s.zz_bit(spin - num_links_);
    }
    int unsatisfied(const SpinState &s, const Neighbor *nb, uint32_t own_bits) const;

    uint32_t num_links_;
    // Per link: the two zz partners first, then the two link partners.
    std::vector<std::array<Neighbor, 4>> link_nb_;
    // Per triangle: the two link partners of each corner's zz spin.
    std::vector<std::array<Neighbor, 6>> triangle_nb_;
    std::vector<std::array<int8_t, 3>> term_tau_;
    std::vector<Term> terms_;
};

namespace reference {

/// Unpacked serial Metropolis sweep over +-1 spins using the interaction table directly.
/// Same move order and random-number consumption as SweepKernel::sweep.
class ReferenceSweeper {
   public:
    ReferenceSweeper(const InteractionTable &table, const DisorderRealization &disorder);

    uint64_t sweep(std::vector<int8_t> &spins, double beta, Stream &rng, int64_t &energy) const;
    int64_t energy(const std::vector<int8_t> &spins) const;

   private:
    int local_field(const std::vector<int8_t> &spins, uint32_t spin) const;

    const InteractionTable *table_;
    std::vector<int8_t> tau_;
    std::vector<std::vector<uint32_t>> spin_terms_;
};

}  // namespace reference

/// Parallel-tempering ensemble. Rung r always sweeps with rung_streams[r]; swaps permute `perm`
/// (rung -> replica) only.
struct ReplicaEnsemble {
    TemperatureLadder ladder;
    std::vector<AcceptanceTable> acceptance;
    std::vector<SpinState> replicas;
    std::vector<int64_t> energies;
    std::vector<uint32_t> perm;
    std::vector<Stream> rung_streams;
    Stream swap_stream;
    uint64_t swap_passes = 0;
    std::vector<uint64_t> swap_attempts;
    std::vector<uint64_t> swap_accepts;
    std::vector<uint64_t> accepted_moves;

    /// Hot start: every replica drawn uniformly at random.
    ReplicaEnsemble(const SweepKernel &kernel, TemperatureLadder ladder, uint64_t seed);

    /// One sweep of every rung; rungs run concurrently when not already inside a parallel region.
    void sweep_all(const SweepKernel &kernel);
    const SpinState &state_at(uint32_t rung) const {
        return replicas[perm[rung]];
    }
    int64_t energy_at(uint32_t rung) const {
        return energies[perm[rung]];
    }
};

/// Alternating even/odd adjacent pairs; accepts with min(1, exp[(b1 - b2)(E1 - E2)]).
void pt_swap_pass(ReplicaEnsemble &ensemble);

/// Log-binned running statistics: bin b holds sweeps [2^b, 2^(b+1)). Each bin is split into up to
/// 16 sub-blocks whose spread gives the bin's standard error; merging blocks guards against
/// autocorrelation longer than one block.
class EquilibrationTracker {
   public:
    struct Bin {
        uint64_t count = 0;
        double sum = 0;
        uint64_t block_count = 0;
        double block_sum = 0;
        uint64_t num_blocks = 0;
        std::array<double, 16> block_means{};

        double mean() const;
        /// Largest batch-means error over 16, 8 and 4 merged blocks (at least 4 of them).
        double std_error() const;
    };

    explicit EquilibrationTracker(uint32_t num_observables = 0);

    /// `sweep` starts at 1 and must increase by one per call.
    void add(uint64_t sweep, std::span<const double> values);

    uint32_t num_observables() const {
        return static_cast<uint32_t>(bins_.size());
    }
    /// Bins whose whole sweep range has been recorded.
    uint32_t complete_bins() const;
    const std::vector<Bin> &bins(uint32_t observable) const {
        return bins_[observable];
    }
    uint64_t last_sweep() const {
        return last_sweep_;
    }

    void set_state(uint64_t last_sweep, std::vector<std::vector<Bin>> bins);
    const std::vector<std::vector<Bin>> &all_bins() const {
        return bins_;
    }

   private:
    uint64_t last_sweep_ = 0;
    std::vector<std::vector<Bin>> bins_;
};

enum class EquilibrationStatus { Undecided, Equilibrated, NotEquilibrated };

/// Equilibrated iff for every observable the last three complete bins pairwise agree within their
/// error bars: |mu_a - mu_b| <= n_sigma (sigma_a + sigma_b). Fewer than three bins: Undecided.
EquilibrationStatus is_equilibrated(const EquilibrationTracker &tracker, double n_sigma = 1.0);

struct RunSettings {
    /// Equilibration sweeps t_eq = 2^b; the measurement phase has the same length.
    int b = 10;
    uint32_t measurement_interval = 4;
    /// Hard cap on equilibration: 2^(b + cap_extra) sweeps.
    int cap_extra = 3;
    /// Double the equilibration phase until the tracker agrees or the cap is reached.
    bool extend_equilibration = true;
    bool record_series = false;
    /// Bins agree when |mu_a - mu_b| <= equilibration_sigma (sigma_a + sigma_b).
    double equilibration_sigma = 2.0;

    bool operator==(const RunSettings &) const = default;
};

enum class SampleStatus : uint8_t { Running = 0, Done = 1, Unequilibrated = 2 };
const char *status_name(SampleStatus s);

/// Thermal sums of one rung over the measurement phase.
struct RungSums {
    uint64_t count = 0;
    double energy = 0;
    double energy_sq = 0;
    std::array<double, 3> m{};
    std::array<double, 3> m2{};
    std::array<double, 3> f0_sq{};
    std::array<double, 3> fk_sq{};

    void add(const Measurement &meas, const std::array<uint32_t, 3> &class_size);
    double chi0(int color, uint32_t class_size) const {
        return f0_sq[color] / static_cast<double>(count) / class_size;
    }
    double chik(int color, uint32_t class_size) const {
        return fk_sq[color] / static_cast<double>(count) / class_size;
    }
};

struct SampleResult {
    SampleStatus status = SampleStatus::Running;
    uint64_t equilibration_sweeps = 0;
    uint64_t total_sweeps = 0;
    std::array<uint32_t, 3> class_size{};
    std::vector<double> temperatures;
    std::vector<RungSums> rungs;
    std::vector<double> swap_acceptance;
    /// Per tracked observable, per complete bin: (mean, standard error).
    std::vector<std::vector<std::pair<double, double>>> tracker_bins;
};

class CheckpointError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Drives one disorder sample: hot start, PT sweeps with a swap pass after every sweep,
/// equilibration (optionally extended), then measurement every `measurement_interval` sweeps.
/// Fully determined by its inputs and `sample_seed`.
class SampleRunner {
   public:
    SampleRunner(const Lattice &lat, const InteractionTable &table, const DisorderRealization &disorder,
                 TemperatureLadder ladder, RunSettings settings, uint64_t sample_seed);

    bool finished() const {
        return status_ != SampleStatus::Running;
    }
    SampleStatus status() const {
        return status_;
    }
    uint64_t sweeps_done() const {
        return sweep_;
    }

    /// Runs at most `max_sweeps` further sweeps; returns the number performed.
    uint64_t advance(uint64_t max_sweeps);
    void run_to_completion() {
        while (!finished()) {
            advance(UINT64_MAX);
        }
    }

    SampleResult result() const;
    const MeasurementSeries &series() const {
        return series_;
    }
    const ReplicaEnsemble &ensemble() const {
        return ensemble_;
    }
    const EquilibrationTracker &tracker() const {
        return tracker_;
    }

    /// Versioned binary snapshot with a trailing checksum.
    std::vector<uint8_t> checkpoint() const;
    /// Throws CheckpointError, leaving this runner untouched, on corrupt or mismatched input.
    void restore(std::span<const uint8_t> bytes);
    void save_checkpoint(const std::string &path) const;
    void load_checkpoint(const std::string &path);

   private:
    void step();
    void measure_all();

    SweepKernel kernel_;
    ObservableKernel observables_;
    double p_;
    uint64_t seed_;
    RunSettings settings_;
    ReplicaEnsemble ensemble_;
    EquilibrationTracker tracker_;
    SampleStatus status_ = SampleStatus::Running;
    bool measuring_ = false;
    uint64_t sweep_ = 0;
    uint64_t eq_target_ = 0;
    uint64_t eq_length_ = 0;
    std::vector<RungSums> sums_;
    MeasurementSeries series_;
};

/// Runs a sample to completion and returns its summary and (if recorded) its series.
struct SampleOutput {
    SampleResult result;
    MeasurementSeries series;
};
SampleOutput run_sample(const Lattice &lat, const DisorderRealization &disorder, const TemperatureLadder &ladder,
                        const RunSettings &settings, uint64_t sample_seed);

}  // namespace tscc
