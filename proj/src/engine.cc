#include "tscc/engine.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include "tscc/bytes.h"
#include "tscc/parallel.h"

namespace tscc {

TemperatureLadder TemperatureLadder::geometric(double t_min, double t_max, uint32_t count) {
    if (count == 0 || !(t_min > 0) || !(t_max >= t_min) || (count == 1 && t_max != t_min) ||
        (count > 1 && t_max == t_min)) {
        throw std::invalid_argument("ladder needs 0 < T_min < T_max and at least two rungs (or one rung with T_min = T_max)");
    }
    std::vector<double> temps(count);
    for (uint32_t k = 0; k < count; ++k) {
        temps[k] = count == 1 ? t_min : t_min * std::pow(t_max / t_min, static_cast<double>(k) / (count - 1));
    }
    temps.front() = t_min;
    temps.back() = t_max;
    return from_temperatures(std::move(temps));
}

TemperatureLadder TemperatureLadder::from_temperatures(std::vector<double> temperatures) {
    if (temperatures.empty()) {
        throw std::invalid_argument("empty temperature ladder");
    }
    for (size_t k = 0; k < temperatures.size(); ++k) {
        if (!(temperatures[k] > 0) || (k > 0 && !(temperatures[k] > temperatures[k - 1]))) {
            throw std::invalid_argument("ladder temperatures must be positive and strictly increasing");
        }
    }
    TemperatureLadder ladder;
    ladder.temperatures = std::move(temperatures);
    for (double t : ladder.temperatures) {
        ladder.betas.push_back(1.0 / t);
    }
    return ladder;
}

AcceptanceTable::AcceptanceTable(double b) : beta(b), prob{std::exp(-beta * 4.0), std::exp(-beta * 8.0)} {
    for (int k = 0; k < 2; ++k) {
        always[k] = prob[k] >= 1.0;
        threshold[k] = always[k] ? 0 : static_cast<uint64_t>(prob[k] * 0x1.0p64);
    }
}

SweepKernel::SweepKernel(const InteractionTable &table, const DisorderRealization &disorder)
    : num_links_(table.num_links()), terms_(table.terms) {
    if (disorder.tau.size() != table.num_qubits) {
        throw std::invalid_argument("disorder realization size differs from qubit count");
    }
    auto ref = [&](uint32_t spin) {
        if (spin < num_links_) {
            return spin;
        }
        uint32_t q = spin - num_links_;
        return kZZ | ((q / 3) << 2) | (q % 3);
    };
    std::vector<std::vector<Neighbor>> nb(table.num_spins);
    for (const Term &t : table.terms) {
        uint32_t tau = disorder.tau_of(t) < 0 ? 1 : 0;
        nb[t.spins[0]].push_back({ref(t.spins[1]), tau});
        nb[t.spins[1]].push_back({ref(t.spins[0]), tau});
    }
    link_nb_.resize(num_links_);
    for (uint32_t i = 0; i < num_links_; ++i) {
        if (nb[i].size() != 4) {
            throw std::invalid_argument("link spin " + std::to_string(i) + " appears in " +
                                        std::to_string(nb[i].size()) + " terms instead of 4");
        }
        std::stable_partition(nb[i].begin(), nb[i].end(), [](const Neighbor &n) { return (n.ref & kZZ) != 0; });
        if (!(nb[i][1].ref & kZZ) || (nb[i][2].ref & kZZ)) {
            throw std::invalid_argument("link spin " + std::to_string(i) +
                                        " must pair with two zz spins and two link spins");
        }
        std::copy(nb[i].begin(), nb[i].end(), link_nb_[i].begin());
    }
    triangle_nb_.resize(table.num_triangles());
    for (uint32_t t = 0; t < table.num_triangles(); ++t) {
        for (uint32_t c = 0; c < 3; ++c) {
            uint32_t zz = table.constraint_groups[t][c];
            if (zz != num_links_ + 3 * t + c) {
                throw std::invalid_argument("constraint groups must follow the registry zz layout");
            }
            if (nb[zz].size() != 2) {
                throw std::invalid_argument("zz spin " + std::to_string(zz) + " appears in " +
                                            std::to_string(nb[zz].size()) + " terms instead of 2");
            }
            if ((nb[zz][0].ref & kZZ) || (nb[zz][1].ref & kZZ)) {
                throw std::invalid_argument("zz spin " + std::to_string(zz) + " must pair with link spins only");
            }
            triangle_nb_[t][2 * c] = nb[zz][0];
            triangle_nb_[t][2 * c + 1] = nb[zz][1];
        }
    }
    term_tau_ = disorder.tau;
}

int64_t SweepKernel::energy(const SpinState &state) const {
    int64_t e = 0;
    for (const Term &t : terms_) {
        uint32_t x = bit(state, t.spins[0]) ^ bit(state, t.spins[1]);
        int tau = term_tau_[t.qubit][static_cast<int>(t.pauli) - 1];
        e -= x ? -tau : tau;
    }
    return e;
}

int SweepKernel::unsatisfied(const SpinState &s, const Neighbor *nb, uint32_t own) const {
    const uint64_t *links = s.link_words().data();
    const uint64_t *tris = s.triangle_words().data();
    return static_cast<int>((nb[0].tau ^ own ^ read(links, tris, nb[0].ref)) +
                            (nb[1].tau ^ own ^ read(links, tris, nb[1].ref)));
}

int SweepKernel::link_delta(const SpinState &state, uint32_t i) const {
    uint32_t own = state.link_bit(i);
    const Neighbor *nb = link_nb_[i].data();
    int u = unsatisfied(state, nb, own) + unsatisfied(state, nb + 2, own);
    return 8 - 4 * u;
}

namespace {
// Corners whose zz spins flip when the code is XOR-ed with d.
constexpr std::array<std::array<uint32_t, 2>, 4> kFlippedCorners{{{0, 0}, {0, 2}, {1, 2}, {0, 1}}};
}  // namespace

int SweepKernel::triangle_delta(const SpinState &state, uint32_t t, uint32_t d) const {
    uint32_t code = state.triangle_code(t);
    const auto &nb = triangle_nb_[t];
    int u = 0;
    for (uint32_t c : kFlippedCorners[d]) {
        u += unsatisfied(state, nb.data() + 2 * c, SpinState::zz_from_code(code, c));
    }
    return 8 - 4 * u;
}

uint64_t SweepKernel::sweep(SpinState &state, const AcceptanceTable &acc_in, Stream &rng_out, int64_t &energy) const {
    // Locals: the spin words are uint64_t too, so members reached through references would be
    // reloaded after every store.
    const AcceptanceTable acc = acc_in;
    Stream rng = rng_out;
    uint64_t accepted = 0;
    uint64_t *links = state.link_words().data();
    uint64_t *tris = state.triangle_words().data();
    int64_t e = energy;
    for (uint32_t i = 0; i < num_links_; ++i) {
        uint32_t own = static_cast<uint32_t>(links[i >> 6] >> (i & 63)) & 1;
        const Neighbor *nb = link_nb_[i].data();
        uint32_t u = (nb[0].tau ^ read_zz(tris, nb[0].ref)) + (nb[1].tau ^ read_zz(tris, nb[1].ref)) +
                     (nb[2].tau ^ read_link(links, nb[2].ref)) + (nb[3].tau ^ read_link(links, nb[3].ref));
        // Terms are unsatisfied when tau ^ own ^ other is set; own is common to all four.
        u = own ? 4 - u : u;
        int delta = 8 - 4 * static_cast<int>(u);
        if (acc.accept(delta, rng)) {
            links[i >> 6] ^= uint64_t{1} << (i & 63);
            e += delta;
            ++accepted;
        }
    }
    uint32_t nt = num_triangles();
    for (uint32_t t = 0; t < nt; ++t) {
        uint32_t d = 1 + rng.below(3);
        uint64_t &word = tris[t >> 5];
        int shift = 2 * (t & 31);
        uint32_t code = static_cast<uint32_t>(word >> shift) & 3;
        const Neighbor *nb = triangle_nb_[t].data();
        uint32_t c0 = kFlippedCorners[d][0], c1 = kFlippedCorners[d][1];
        uint32_t z0 = SpinState::zz_from_code(code, c0), z1 = SpinState::zz_from_code(code, c1);
        uint32_t u = (nb[2 * c0].tau ^ z0 ^ read_link(links, nb[2 * c0].ref)) +
                     (nb[2 * c0 + 1].tau ^ z0 ^ read_link(links, nb[2 * c0 + 1].ref)) +
                     (nb[2 * c1].tau ^ z1 ^ read_link(links, nb[2 * c1].ref)) +
                     (nb[2 * c1 + 1].tau ^ z1 ^ read_link(links, nb[2 * c1 + 1].ref));
        int delta = 8 - 4 * static_cast<int>(u);
        if (acc.accept(delta, rng)) {
            word ^= static_cast<uint64_t>(d) << shift;
            e += delta;
            ++accepted;
        }
    }
    energy = e;
    rng_out = rng;
    return accepted;
}

namespace reference {

ReferenceSweeper::ReferenceSweeper(const InteractionTable &table, const DisorderRealization &disorder)
    : table_(&table), spin_terms_(table.num_spins) {
    for (uint32_t k = 0; k < table.terms.size(); ++k) {
        tau_.push_back(static_cast<int8_t>(disorder.tau_of(table.terms[k])));
        for (uint32_t s : table.terms[k].spins) {
            spin_terms_[s].push_back(k);
        }
    }
}

int ReferenceSweeper::local_field(const std::vector<int8_t> &spins, uint32_t spin) const {
    int sum = 0;
    for (uint32_t k : spin_terms_[spin]) {
        const Term &t = table_->terms[k];
        sum += tau_[k] * spins[t.spins[0]] * spins[t.spins[1]];
    }
    return sum;
}

int64_t ReferenceSweeper::energy(const std::vector<int8_t> &spins) const {
    int64_t e = 0;
    for (uint32_t k = 0; k < table_->terms.size(); ++k) {
        const Term &t = table_->terms[k];
        e -= tau_[k] * spins[t.spins[0]] * spins[t.spins[1]];
    }
    return e;
}

uint64_t ReferenceSweeper::sweep(std::vector<int8_t> &spins, double beta, Stream &rng, int64_t &energy) const {
    auto accept = [&](int delta) { return delta <= 0 || metropolis_accept(std::exp(-beta * delta), rng); };
    uint64_t accepted = 0;
    uint32_t n = table_->num_links();
    for (uint32_t i = 0; i < n; ++i) {
        int delta = 2 * local_field(spins, i);
        if (accept(delta)) {
            spins[i] = static_cast<int8_t>(-spins[i]);
            energy += delta;
            ++accepted;
        }
    }
    for (uint32_t t = 0; t < table_->num_triangles(); ++t) {
        uint32_t d = 1 + rng.below(3);
        const auto &group = table_->constraint_groups[t];
        uint32_t a = group[kFlippedCorners[d][0]];
        uint32_t b = group[kFlippedCorners[d][1]];
        int delta = 2 * (local_field(spins, a) + local_field(spins, b));
        if (accept(delta)) {
            spins[a] = static_cast<int8_t>(-spins[a]);
            spins[b] = static_cast<int8_t>(-spins[b]);
            energy += delta;
            ++accepted;
        }
    }
    return accepted;
}

}  // namespace reference

ReplicaEnsemble::ReplicaEnsemble(const SweepKernel &kernel, TemperatureLadder l, uint64_t seed)
    : ladder(std::move(l)), swap_stream(hash_words({seed, 2})) {
    uint32_t nr = ladder.size();
    for (uint32_t r = 0; r < nr; ++r) {
        acceptance.emplace_back(ladder.betas[r]);
        SpinState s(kernel.num_links(), kernel.num_triangles());
        Stream init(hash_words({seed, 3, r}));
        s.randomize(init);
        energies.push_back(kernel.energy(s));
        replicas.push_back(std::move(s));
        perm.push_back(r);
        rung_streams.emplace_back(hash_words({seed, 1, r}));
    }
    swap_attempts.assign(nr > 0 ? nr - 1 : 0, 0);
    swap_accepts.assign(nr > 0 ? nr - 1 : 0, 0);
    accepted_moves.assign(nr, 0);
}

void ReplicaEnsemble::sweep_all(const SweepKernel &kernel) {
    int64_t nr = ladder.size();
    auto body = [&](int64_t r) {
        uint32_t rep = perm[r];
        accepted_moves[r] += kernel.sweep(replicas[rep], acceptance[r], rung_streams[r], energies[rep]);
    };
    if (nr > 1 && !in_parallel_region() && max_threads() > 1) {
        TSCC_OMP(parallel for schedule(static))
        for (int64_t r = 0; r < nr; ++r) {
            body(r);
        }
    } else {
        for (int64_t r = 0; r < nr; ++r) {
            body(r);
        }
    }
}

void pt_swap_pass(ReplicaEnsemble &ens) {
    uint32_t nr = ens.ladder.size();
    for (uint32_t r = ens.swap_passes & 1; r + 1 < nr; r += 2) {
        uint32_t a = ens.perm[r];
        uint32_t b = ens.perm[r + 1];
        double delta = (ens.ladder.betas[r] - ens.ladder.betas[r + 1]) * static_cast<double>(ens.energies[a] - ens.energies[b]);
        ens.swap_attempts[r]++;
        if (metropolis_accept(delta >= 0 ? 1.0 : std::exp(delta), ens.swap_stream)) {
            std::swap(ens.perm[r], ens.perm[r + 1]);
            ens.swap_accepts[r]++;
        }
    }
    ens.swap_passes++;
}

double EquilibrationTracker::Bin::mean() const {
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double EquilibrationTracker::Bin::std_error() const {
    double worst = 0;
    for (uint64_t group = 1; group <= 4; group *= 2) {
        uint64_t k = num_blocks / group;
        if (k < (group == 1 ? 2 : 4)) {
            break;
        }
        double s = 0, s2 = 0;
        for (uint64_t i = 0; i < k; ++i) {
            double m = 0;
            for (uint64_t j = 0; j < group; ++j) {
                m += block_means[i * group + j];
            }
            m /= static_cast<double>(group);
            s += m;
            s2 += m * m;
        }
        double kd = static_cast<double>(k);
        double var = (s2 - s * s / kd) / (kd - 1);
        worst = std::max(worst, std::sqrt(std::max(var, 0.0) / kd));
    }
    return worst;
}

EquilibrationTracker::EquilibrationTracker(uint32_t num_observables) : bins_(num_observables) {
}

void EquilibrationTracker::add(uint64_t sweep, std::span<const double> values) {
    if (sweep != last_sweep_ + 1) {
        throw std::invalid_argument("tracker sweeps must be consecutive starting at 1");
    }
    if (values.size() != bins_.size()) {
        throw std::invalid_argument("tracker observable count mismatch");
    }
    last_sweep_ = sweep;
    uint32_t b = static_cast<uint32_t>(std::bit_width(sweep)) - 1;
    uint64_t block = std::max<uint64_t>(1, (uint64_t{1} << b) / 16);
    for (size_t k = 0; k < values.size(); ++k) {
        auto &obs = bins_[k];
        if (obs.size() <= b) {
            obs.resize(b + 1);
        }
        Bin &bin = obs[b];
        bin.count++;
        bin.sum += values[k];
        bin.block_sum += values[k];
        if (++bin.block_count == block) {
            bin.block_means[bin.num_blocks++] = bin.block_sum / static_cast<double>(block);
            bin.block_sum = 0;
            bin.block_count = 0;
        }
    }
}

uint32_t EquilibrationTracker::complete_bins() const {
    return static_cast<uint32_t>(std::bit_width(last_sweep_ + 1)) - 1;
}

void EquilibrationTracker::set_state(uint64_t last_sweep, std::vector<std::vector<Bin>> bins) {
    last_sweep_ = last_sweep;
    bins_ = std::move(bins);
}

EquilibrationStatus is_equilibrated(const EquilibrationTracker &tracker, double n_sigma) {
    uint32_t k = tracker.complete_bins();
    if (k < 3) {
        return EquilibrationStatus::Undecided;
    }
    for (uint32_t obs = 0; obs < tracker.num_observables(); ++obs) {
        const auto &bins = tracker.bins(obs);
        for (uint32_t a = k - 3; a < k; ++a) {
            for (uint32_t b = a + 1; b < k; ++b) {
                double diff = std::abs(bins[a].mean() - bins[b].mean());
                if (diff > n_sigma * (bins[a].std_error() + bins[b].std_error())) {
                    return EquilibrationStatus::NotEquilibrated;
                }
            }
        }
    }
    return EquilibrationStatus::Equilibrated;
}

const char *status_name(SampleStatus s) {
    switch (s) {
        case SampleStatus::Running:
            return "running";
        case SampleStatus::Done:
            return "done";
        case SampleStatus::Unequilibrated:
            return "unequilibrated";
    }
    return "?";
}

void RungSums::add(const Measurement &meas, const std::array<uint32_t, 3> &class_size) {
    count++;
    double e = static_cast<double>(meas.energy);
    energy += e;
    energy_sq += e * e;
    for (int c = 0; c < 3; ++c) {
        double f0 = static_cast<double>(meas.f0[c]);
        double m = f0 / class_size[c];
        this->m[c] += m;
        m2[c] += m * m;
        f0_sq[c] += f0 * f0;
        fk_sq[c] += std::norm(meas.fk[c]);
    }
}

SampleRunner::SampleRunner(const Lattice &lat, const InteractionTable &table, const DisorderRealization &disorder,
                           TemperatureLadder ladder, RunSettings settings, uint64_t sample_seed)
    : kernel_(table, disorder),
      observables_(lat),
      p_(disorder.p),
      seed_(sample_seed),
      settings_(settings),
      ensemble_(kernel_, std::move(ladder), sample_seed),
      tracker_(1) {
    if (settings_.b < 0 || settings_.b > 40 || settings_.cap_extra < 0 || settings_.b + settings_.cap_extra > 48) {
        throw std::invalid_argument("equilibration exponent out of range");
    }
    if (settings_.measurement_interval == 0) {
        throw std::invalid_argument("measurement interval must be positive");
    }
    eq_target_ = uint64_t{1} << settings_.b;
    sums_.resize(ensemble_.ladder.size());
    series_.class_size = observables_.class_sizes();
}

void SampleRunner::measure_all() {
    const auto &cs = observables_.class_sizes();
    for (uint32_t r = 0; r < ensemble_.ladder.size(); ++r) {
        Measurement meas = observables_.measure(ensemble_.state_at(r), ensemble_.energy_at(r));
        sums_[r].add(meas, cs);
        if (settings_.record_series) {
            SeriesRecord rec{sweep_, r, meas.energy, {}, meas.fk};
            for (int c = 0; c < 3; ++c) {
                rec.m[c] = static_cast<double>(meas.f0[c]) / cs[c];
            }
            series_.append(rec);
        }
    }
}

void SampleRunner::step() {
    ensemble_.sweep_all(kernel_);
    pt_swap_pass(ensemble_);
    ++sweep_;
    double total = 0;
    for (int64_t e : ensemble_.energies) {
        total += static_cast<double>(e);
    }
    tracker_.add(sweep_, std::span<const double>(&total, 1));

    if (!measuring_) {
        if (sweep_ == eq_target_) {
            bool ok = !settings_.extend_equilibration ||
                      is_equilibrated(tracker_, settings_.equilibration_sigma) == EquilibrationStatus::Equilibrated;
            uint64_t cap = uint64_t{1} << (settings_.b + settings_.cap_extra);
            if (ok) {
                measuring_ = true;
                eq_length_ = sweep_;
            } else if (eq_target_ * 2 <= cap) {
                eq_target_ *= 2;
            } else {
                status_ = SampleStatus::Unequilibrated;
                eq_length_ = sweep_;
            }
        }
        return;
    }
    if ((sweep_ - eq_length_) % settings_.measurement_interval == 0) {
        measure_all();
    }
    if (sweep_ == 2 * eq_length_) {
        status_ = SampleStatus::Done;
    }
}

uint64_t SampleRunner::advance(uint64_t max_sweeps) {
    uint64_t done = 0;
    while (!finished() && done < max_sweeps) {
        step();
        ++done;
    }
    return done;
}

SampleResult SampleRunner::result() const {
    SampleResult out;
    out.status = status_;
    out.equilibration_sweeps = measuring_ || status_ != SampleStatus::Running ? eq_length_ : eq_target_;
    out.total_sweeps = sweep_;
    out.class_size = observables_.class_sizes();
    out.temperatures = ensemble_.ladder.temperatures;
    out.rungs = sums_;
    for (size_t r = 0; r < ensemble_.swap_attempts.size(); ++r) {
        uint64_t att = ensemble_.swap_attempts[r];
        out.swap_acceptance.push_back(att == 0 ? 0.0 : static_cast<double>(ensemble_.swap_accepts[r]) / att);
    }
    uint32_t complete = tracker_.complete_bins();
    for (uint32_t k = 0; k < tracker_.num_observables(); ++k) {
        std::vector<std::pair<double, double>> bins;
        for (uint32_t b = 0; b < complete && b < tracker_.bins(k).size(); ++b) {
            bins.emplace_back(tracker_.bins(k)[b].mean(), tracker_.bins(k)[b].std_error());
        }
        out.tracker_bins.push_back(std::move(bins));
    }
    return out;
}

namespace {

constexpr char kMagic[8] = {'T', 'S', 'C', 'C', 'C', 'K', 'P', 'T'};
constexpr uint32_t kCheckpointVersion = 1;

template <class T>
T get(ByteReader &in) {
    return in.get<T, CheckpointError>();
}

}  // namespace

std::vector<uint8_t> SampleRunner::checkpoint() const {
    ByteWriter out;
    for (char c : kMagic) {
        out.put(c);
    }
    out.put(kCheckpointVersion);
    uint32_t nr = ensemble_.ladder.size();
    out.put(kernel_.num_links());
    out.put(kernel_.num_triangles());
    out.put(nr);
    out.put(p_);
    out.put(seed_);
    for (double b : ensemble_.ladder.betas) {
        out.put(b);
    }
    out.put<int32_t>(settings_.b);
    out.put(settings_.measurement_interval);
    out.put<int32_t>(settings_.cap_extra);
    out.put<uint8_t>(settings_.extend_equilibration);
    out.put<uint8_t>(settings_.record_series);
    out.put(settings_.equilibration_sigma);

    out.put(static_cast<uint8_t>(status_));
    out.put<uint8_t>(measuring_);
    out.put(sweep_);
    out.put(eq_target_);
    out.put(eq_length_);

    for (uint32_t r = 0; r < nr; ++r) {
        out.put(ensemble_.perm[r]);
        out.put(ensemble_.energies[r]);
        for (uint64_t w : ensemble_.replicas[r].link_words()) {
            out.put(w);
        }
        for (uint64_t w : ensemble_.replicas[r].triangle_words()) {
            out.put(w);
        }
        out.put(ensemble_.rung_streams[r].key());
        out.put(ensemble_.rung_streams[r].counter());
        out.put(ensemble_.accepted_moves[r]);
    }
    out.put(ensemble_.swap_stream.key());
    out.put(ensemble_.swap_stream.counter());
    out.put(ensemble_.swap_passes);
    out.put_vector(ensemble_.swap_attempts);
    out.put_vector(ensemble_.swap_accepts);

    out.put(tracker_.num_observables());
    out.put(tracker_.last_sweep());
    for (const auto &bins : tracker_.all_bins()) {
        out.put_vector(bins);
    }
    for (const RungSums &s : sums_) {
        out.put(s);
    }
    out.put<uint64_t>(series_.rungs.size());
    for (const auto &records : series_.rungs) {
        out.put_vector(records);
    }

    std::vector<uint8_t> bytes = std::move(out.bytes());
    uint64_t h = fnv1a64(bytes);
    const auto *hp = reinterpret_cast<const uint8_t *>(&h);
    bytes.insert(bytes.end(), hp, hp + sizeof(h));
    return bytes;
}

void SampleRunner::restore(std::span<const uint8_t> bytes) {
    if (bytes.size() < sizeof(kMagic) + sizeof(uint64_t)) {
        throw CheckpointError("checkpoint too short (" + std::to_string(bytes.size()) + " bytes)");
    }
    if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin(),
                    [](char a, uint8_t b) { return static_cast<uint8_t>(a) == b; })) {
        throw CheckpointError("not a checkpoint file (bad magic)");
    }
    auto body = bytes.first(bytes.size() - sizeof(uint64_t));
    uint64_t stored;
    std::memcpy(&stored, bytes.data() + body.size(), sizeof(stored));
    if (fnv1a64(body) != stored) {
        throw CheckpointError("checkpoint checksum mismatch (file corrupted)");
    }

    ByteReader in(body);
    for (size_t k = 0; k < sizeof(kMagic); ++k) {
        get<char>(in);
    }
    uint32_t version = get<uint32_t>(in);
    if (version != kCheckpointVersion) {
        throw CheckpointError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                              std::to_string(kCheckpointVersion) + ")");
    }
    uint32_t nl = get<uint32_t>(in), nt = get<uint32_t>(in), nr = get<uint32_t>(in);
    if (nl != kernel_.num_links() || nt != kernel_.num_triangles() || nr != ensemble_.ladder.size()) {
        throw CheckpointError("checkpoint layout (" + std::to_string(nl) + " links, " + std::to_string(nt) +
                              " triangles, " + std::to_string(nr) + " rungs) differs from this run");
    }
    double p = get<double>(in);
    uint64_t seed = get<uint64_t>(in);
    if (double_bits(p) != double_bits(p_) || seed != seed_) {
        throw CheckpointError("checkpoint belongs to a different disorder sample");
    }
    for (uint32_t r = 0; r < nr; ++r) {
        if (double_bits(get<double>(in)) != double_bits(ensemble_.ladder.betas[r])) {
            throw CheckpointError("checkpoint temperature ladder differs at rung " + std::to_string(r));
        }
    }
    RunSettings s;
    s.b = get<int32_t>(in);
    s.measurement_interval = get<uint32_t>(in);
    s.cap_extra = get<int32_t>(in);
    s.extend_equilibration = get<uint8_t>(in) != 0;
    s.record_series = get<uint8_t>(in) != 0;
    s.equilibration_sigma = get<double>(in);
    if (!(s == settings_)) {
        throw CheckpointError("checkpoint run settings differ from this run");
    }

    auto status = static_cast<SampleStatus>(get<uint8_t>(in));
    bool measuring = get<uint8_t>(in) != 0;
    uint64_t sweep = get<uint64_t>(in);
    uint64_t eq_target = get<uint64_t>(in);
    uint64_t eq_length = get<uint64_t>(in);

    ReplicaEnsemble ens = ensemble_;
    for (uint32_t r = 0; r < nr; ++r) {
        ens.perm[r] = get<uint32_t>(in);
        ens.energies[r] = get<int64_t>(in);
        for (uint64_t &w : ens.replicas[r].link_words()) {
            w = get<uint64_t>(in);
        }
        for (uint64_t &w : ens.replicas[r].triangle_words()) {
            w = get<uint64_t>(in);
        }
        uint64_t key = get<uint64_t>(in);
        uint64_t counter = get<uint64_t>(in);
        ens.rung_streams[r] = Stream(key, counter);
        ens.accepted_moves[r] = get<uint64_t>(in);
    }
    {
        uint64_t key = get<uint64_t>(in);
        uint64_t counter = get<uint64_t>(in);
        ens.swap_stream = Stream(key, counter);
    }
    ens.swap_passes = get<uint64_t>(in);
    ens.swap_attempts = in.get_vector<uint64_t, CheckpointError>(nr);
    ens.swap_accepts = in.get_vector<uint64_t, CheckpointError>(nr);
    std::vector<bool> seen(nr, false);
    for (uint32_t r = 0; r < nr; ++r) {
        if (ens.perm[r] >= nr || seen[ens.perm[r]]) {
            throw CheckpointError("checkpoint replica permutation is not a bijection");
        }
        seen[ens.perm[r]] = true;
        if (kernel_.energy(ens.replicas[r]) != ens.energies[r]) {
            throw CheckpointError("checkpoint energy of replica " + std::to_string(r) + " is inconsistent");
        }
    }
    if (ens.swap_attempts.size() != ensemble_.swap_attempts.size() ||
        ens.swap_accepts.size() != ensemble_.swap_accepts.size()) {
        throw CheckpointError("checkpoint swap statistics have the wrong size");
    }

    uint32_t num_obs = get<uint32_t>(in);
    uint64_t last = get<uint64_t>(in);
    if (num_obs != tracker_.num_observables() || last != sweep) {
        throw CheckpointError("checkpoint tracker state inconsistent");
    }
    std::vector<std::vector<EquilibrationTracker::Bin>> bins;
    for (uint32_t k = 0; k < num_obs; ++k) {
        bins.push_back(in.get_vector<EquilibrationTracker::Bin, CheckpointError>(64));
    }
    std::vector<RungSums> sums(nr);
    for (RungSums &rs : sums) {
        rs = get<RungSums>(in);
    }
    MeasurementSeries series;
    series.class_size = series_.class_size;
    uint64_t num_series = get<uint64_t>(in);
    if (num_series > nr) {
        throw CheckpointError("checkpoint series has too many rungs");
    }
    for (uint64_t r = 0; r < num_series; ++r) {
        series.rungs.push_back(in.get_vector<SeriesRecord, CheckpointError>(uint64_t{1} << 40));
    }
    if (in.remaining() != 0) {
        throw CheckpointError("checkpoint has " + std::to_string(in.remaining()) + " trailing bytes");
    }

    ensemble_ = std::move(ens);
    tracker_.set_state(last, std::move(bins));
    sums_ = std::move(sums);
    series_ = std::move(series);
    status_ = status;
    measuring_ = measuring;
    sweep_ = sweep;
    eq_target_ = eq_target;
    eq_length_ = eq_length;
}

void SampleRunner::save_checkpoint(const std::string &path) const {
    std::vector<uint8_t> bytes = checkpoint();
    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        f.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!f) {
            throw std::runtime_error("cannot write checkpoint " + tmp);
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw std::runtime_error("cannot move checkpoint into place at " + path);
    }
}

void SampleRunner::load_checkpoint(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw CheckpointError("cannot open checkpoint " + path);
    }
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    restore(bytes);
}

SampleOutput run_sample(const Lattice &lat, const DisorderRealization &disorder, const TemperatureLadder &ladder,
                        const RunSettings &settings, uint64_t sample_seed) {
    InteractionTable table = compile_interactions(lat);
    SampleRunner runner(lat, table, disorder, ladder, settings, sample_seed);
    runner.run_to_completion();
    return {runner.result(), runner.series()};
}

}  // namespace tscc
