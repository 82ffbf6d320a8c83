#include "tscc/exact.h"

#include <bit>
#include <cmath>
#include <complex>

#include "tscc/parallel.h"

namespace tscc {

namespace {

void require_bits(uint32_t bits) {
    if (bits > kMaxEnumerationBits) {
        throw EnumerationTooLarge("instance has " + std::to_string(bits) +
                                  " free binary degrees of freedom; exhaustive enumeration is limited to " +
                                  std::to_string(kMaxEnumerationBits));
    }
}

// Flattened spin -> incident term lists.
struct Adjacency {
    std::vector<uint32_t> offsets;
    std::vector<uint32_t> terms;

    template <class Members>
    static Adjacency build(size_t num_vars, size_t num_terms, Members members) {
        Adjacency adj;
        std::vector<std::vector<uint32_t>> lists(num_vars);
        for (uint32_t t = 0; t < num_terms; ++t) {
            for (uint32_t v : members(t)) {
                lists[v].push_back(t);
            }
        }
        adj.offsets.push_back(0);
        for (const auto &l : lists) {
            adj.terms.insert(adj.terms.end(), l.begin(), l.end());
            adj.offsets.push_back(static_cast<uint32_t>(adj.terms.size()));
        }
        return adj;
    }
};

struct Geometry {
    std::vector<uint8_t> color;
    std::vector<double> cos_phase;
    std::vector<double> sin_phase;
    std::array<uint32_t, 3> class_size{};

    explicit Geometry(const Lattice &lat) {
        size_t ns = lat.spins.size();
        color.resize(ns);
        cos_phase.resize(ns);
        sin_phase.resize(ns);
        for (size_t i = 0; i < ns; ++i) {
            const SpinInfo &s = lat.spins.spins[i];
            color[i] = static_cast<uint8_t>(s.color);
            double phase = lat.k_min.phase(s.position);
            cos_phase[i] = std::cos(phase);
            sin_phase[i] = std::sin(phase);
            class_size[color[i]]++;
        }
    }
};

// Registry spins flipped by free bit b: link b, or two zz spins of a triangle.
struct FreeBits {
    uint32_t num_links;
    const std::vector<std::array<uint32_t, 3>> *groups;

    uint32_t count() const {
        return num_links + 2 * static_cast<uint32_t>(groups->size());
    }
    template <class F>
    void for_each_spin(uint32_t bit, F &&f) const {
        if (bit < num_links) {
            f(bit);
            return;
        }
        uint32_t t = (bit - num_links) / 2;
        uint32_t e = (bit - num_links) % 2;
        const auto &g = (*groups)[t];
        f(g[e]);
        f(g[2]);
    }
};

EnergyResolvedSums empty_sums(uint32_t num_terms, const Geometry &geo) {
    EnergyResolvedSums s;
    s.energy_offset = -static_cast<int64_t>(num_terms);
    size_t levels = num_terms + 1;
    s.count.assign(levels, 0);
    s.sum_f0.assign(levels, {0, 0, 0});
    s.sum_f0_sq.assign(levels, {0, 0, 0});
    s.sum_fk_sq.assign(levels, {0.0, 0.0, 0.0});
    s.class_size = geo.class_size;
    return s;
}

void merge_into(EnergyResolvedSums &dst, const EnergyResolvedSums &src) {
    for (size_t k = 0; k < dst.count.size(); ++k) {
        dst.count[k] += src.count[k];
        for (int c = 0; c < 3; ++c) {
            dst.sum_f0[k][c] += src.sum_f0[k][c];
            dst.sum_f0_sq[k][c] += src.sum_f0_sq[k][c];
            dst.sum_fk_sq[k][c] += src.sum_fk_sq[k][c];
        }
    }
}

void check_inputs(const Lattice &lat, const InteractionTable &table, const DisorderRealization &disorder) {
    if (lat.num_qubits() != table.num_qubits || lat.spins.size() != table.num_spins) {
        throw std::invalid_argument("lattice and interaction table describe different instances");
    }
    if (disorder.tau.size() != table.num_qubits) {
        throw std::invalid_argument("disorder realization size differs from qubit count");
    }
}

}  // namespace

ExactThermal EnergyResolvedSums::at(double beta) const {
    ExactThermal out;
    out.beta = beta;
    size_t first = 0;
    while (first < count.size() && count[first] == 0) {
        ++first;
    }
    double z = 0, e1 = 0, e2 = 0;
    std::array<double, 3> f0{}, f0sq{}, fksq{};
    for (size_t k = first; k < count.size(); ++k) {
        if (count[k] == 0) {
            continue;
        }
        double e = static_cast<double>(energy_offset + 2 * static_cast<int64_t>(k));
        double w = std::exp(-beta * 2.0 * static_cast<double>(k - first));
        double wc = w * static_cast<double>(count[k]);
        z += wc;
        e1 += wc * e;
        e2 += wc * e * e;
        for (int c = 0; c < 3; ++c) {
            f0[c] += w * static_cast<double>(sum_f0[k][c]);
            f0sq[c] += w * static_cast<double>(sum_f0_sq[k][c]);
            fksq[c] += w * sum_fk_sq[k][c];
        }
    }
    out.energy = e1 / z;
    out.energy_sq = e2 / z;
    for (int c = 0; c < 3; ++c) {
        double np = class_size[c];
        out.m[c] = f0[c] / (z * np);
        out.m2[c] = f0sq[c] / (z * np * np);
        out.chi0[c] = f0sq[c] / (z * np);
        out.chik[c] = fksq[c] / (z * np);
    }
    return out;
}

std::map<int64_t, uint64_t> EnergyResolvedSums::spectrum() const {
    std::map<int64_t, uint64_t> out;
    for (size_t k = 0; k < count.size(); ++k) {
        if (count[k] != 0) {
            out[energy_offset + 2 * static_cast<int64_t>(k)] = count[k];
        }
    }
    return out;
}

EnergyResolvedSums enumerate_states(const Lattice &lat, const InteractionTable &table,
                                    const DisorderRealization &disorder) {
    check_inputs(lat, table, disorder);
    FreeBits free{table.num_links(), &table.constraint_groups};
    uint32_t bits = free.count();
    require_bits(bits);

    Geometry geo(lat);
    size_t num_spins = table.num_spins;
    uint32_t num_terms = static_cast<uint32_t>(table.terms.size());
    Adjacency adj = Adjacency::build(num_spins, num_terms, [&](uint32_t t) { return table.terms[t].spins; });
    std::vector<int8_t> tau(num_terms);
    for (uint32_t t = 0; t < num_terms; ++t) {
        tau[t] = static_cast<int8_t>(disorder.tau_of(table.terms[t]));
    }

    uint32_t chunk_bits = bits > 12 ? std::min<uint32_t>(8, bits - 4) : 0;
    uint32_t low_bits = bits - chunk_bits;
    uint64_t num_chunks = uint64_t{1} << chunk_bits;
    std::vector<EnergyResolvedSums> partial(num_chunks);

    TSCC_OMP(parallel for schedule(dynamic, 1))
    for (int64_t chunk = 0; chunk < static_cast<int64_t>(num_chunks); ++chunk) {
        EnergyResolvedSums sums = empty_sums(num_terms, geo);
        std::vector<int8_t> s(num_spins, 1);
        uint64_t base = static_cast<uint64_t>(chunk) << low_bits;
        uint64_t gray = base ^ (base >> 1);
        for (uint32_t b = 0; b < bits; ++b) {
            if ((gray >> b) & 1) {
                free.for_each_spin(b, [&](uint32_t i) { s[i] = static_cast<int8_t>(-s[i]); });
            }
        }
        int64_t e = 0;
        for (uint32_t t = 0; t < num_terms; ++t) {
            e -= tau[t] * s[table.terms[t].spins[0]] * s[table.terms[t].spins[1]];
        }
        std::array<int64_t, 3> f0{0, 0, 0};
        std::array<double, 3> fk_re{0, 0, 0}, fk_im{0, 0, 0};
        for (size_t i = 0; i < num_spins; ++i) {
            f0[geo.color[i]] += s[i];
            fk_re[geo.color[i]] += s[i] * geo.cos_phase[i];
            fk_im[geo.color[i]] += s[i] * geo.sin_phase[i];
        }

        auto flip = [&](uint32_t i) {
            int64_t local = 0;
            for (uint32_t k = adj.offsets[i]; k < adj.offsets[i + 1]; ++k) {
                const Term &t = table.terms[adj.terms[k]];
                local += tau[adj.terms[k]] * s[t.spins[0]] * s[t.spins[1]];
            }
            e += 2 * local;
            s[i] = static_cast<int8_t>(-s[i]);
            int c = geo.color[i];
            f0[c] += 2 * s[i];
            fk_re[c] += 2 * s[i] * geo.cos_phase[i];
            fk_im[c] += 2 * s[i] * geo.sin_phase[i];
        };
        auto record = [&]() {
            size_t level = static_cast<size_t>((e - sums.energy_offset) / 2);
            sums.count[level]++;
            for (int c = 0; c < 3; ++c) {
                sums.sum_f0[level][c] += f0[c];
                sums.sum_f0_sq[level][c] += f0[c] * f0[c];
                sums.sum_fk_sq[level][c] += fk_re[c] * fk_re[c] + fk_im[c] * fk_im[c];
            }
        };

        record();
        uint64_t steps = uint64_t{1} << low_bits;
        for (uint64_t y = 1; y < steps; ++y) {
            free.for_each_spin(static_cast<uint32_t>(std::countr_zero(y)), flip);
            record();
        }
        partial[chunk] = std::move(sums);
    }

    EnergyResolvedSums total = empty_sums(num_terms, geo);
    for (const auto &p : partial) {
        merge_into(total, p);
    }
    return total;
}

std::vector<ExactThermal> enumerate_thermal(const Lattice &lat, const InteractionTable &table,
                                            const DisorderRealization &disorder, std::span<const double> betas) {
    EnergyResolvedSums sums = enumerate_states(lat, table, disorder);
    std::vector<ExactThermal> out;
    for (double beta : betas) {
        out.push_back(sums.at(beta));
    }
    return out;
}

std::map<int64_t, uint64_t> ungauged_spectrum(const InteractionTable &table, const DisorderRealization &disorder) {
    if (disorder.tau.size() != table.num_qubits) {
        throw std::invalid_argument("disorder realization size differs from qubit count");
    }
    uint32_t n = table.num_qubits;
    uint32_t num_vars = n + 3 * table.num_triangles();
    require_bits(num_vars);

    // Variable of each generator: link spins keep their registry index, Z generators follow.
    std::vector<uint32_t> var_of(table.generator_spin.size(), UINT32_MAX);
    for (size_t g = 0; g < table.generator_spin.size(); ++g) {
        if (table.generator_spin[g] >= 0) {
            var_of[g] = static_cast<uint32_t>(table.generator_spin[g]);
        }
    }
    for (uint32_t t = 0; t < table.num_triangles(); ++t) {
        for (uint32_t c = 0; c < 3; ++c) {
            var_of[table.triangle_z_generators[t][c]] = n + 3 * t + c;
        }
    }
    uint32_t num_terms = static_cast<uint32_t>(table.raw_terms.size());
    std::vector<std::vector<uint32_t>> members(num_terms);
    std::vector<int8_t> tau(num_terms);
    for (uint32_t t = 0; t < num_terms; ++t) {
        for (uint32_t g : table.raw_terms[t].generators) {
            if (var_of[g] == UINT32_MAX) {
                throw std::invalid_argument("raw term references a generator without a variable");
            }
            members[t].push_back(var_of[g]);
        }
        tau[t] = static_cast<int8_t>(disorder.tau[table.raw_terms[t].qubit][static_cast<int>(table.raw_terms[t].pauli) - 1]);
    }
    Adjacency adj = Adjacency::build(num_vars, num_terms, [&](uint32_t t) { return members[t]; });

    uint32_t chunk_bits = num_vars > 12 ? std::min<uint32_t>(8, num_vars - 4) : 0;
    uint32_t low_bits = num_vars - chunk_bits;
    uint64_t num_chunks = uint64_t{1} << chunk_bits;
    size_t levels = num_terms + 1;
    std::vector<std::vector<uint64_t>> partial(num_chunks);

    TSCC_OMP(parallel for schedule(dynamic, 1))
    for (int64_t chunk = 0; chunk < static_cast<int64_t>(num_chunks); ++chunk) {
        std::vector<uint64_t> hist(levels, 0);
        std::vector<int8_t> s(num_vars, 1);
        uint64_t base = static_cast<uint64_t>(chunk) << low_bits;
        uint64_t gray = base ^ (base >> 1);
        for (uint32_t b = 0; b < num_vars; ++b) {
            if ((gray >> b) & 1) {
                s[b] = -1;
            }
        }
        auto term_value = [&](uint32_t t) {
            int v = tau[t];
            for (uint32_t m : members[t]) {
                v *= s[m];
            }
            return v;
        };
        int64_t e = 0;
        for (uint32_t t = 0; t < num_terms; ++t) {
            e -= term_value(t);
        }
        hist[static_cast<size_t>((e + num_terms) / 2)]++;
        uint64_t steps = uint64_t{1} << low_bits;
        for (uint64_t y = 1; y < steps; ++y) {
            uint32_t v = static_cast<uint32_t>(std::countr_zero(y));
            int64_t local = 0;
            for (uint32_t k = adj.offsets[v]; k < adj.offsets[v + 1]; ++k) {
                local += term_value(adj.terms[k]);
            }
            e += 2 * local;
            s[v] = static_cast<int8_t>(-s[v]);
            hist[static_cast<size_t>((e + num_terms) / 2)]++;
        }
        partial[chunk] = std::move(hist);
    }

    std::map<int64_t, uint64_t> out;
    for (size_t k = 0; k < levels; ++k) {
        uint64_t c = 0;
        for (const auto &h : partial) {
            c += h[k];
        }
        if (c != 0) {
            out[-static_cast<int64_t>(num_terms) + 2 * static_cast<int64_t>(k)] = c;
        }
    }
    return out;
}

GaugeFixingReport verify_gauge_fixing(const Lattice &lat, const InteractionTable &table,
                                      const DisorderRealization &disorder) {
    GaugeFixingReport report;
    report.gauge_fixed = enumerate_states(lat, table, disorder).spectrum();
    report.ungauged = ungauged_spectrum(table, disorder);
    report.degeneracy_factor = uint64_t{1} << table.num_triangles();
    report.equivalent = true;
    std::map<int64_t, uint64_t> levels = report.gauge_fixed;
    levels.insert(report.ungauged.begin(), report.ungauged.end());
    for (const auto &[e, _] : levels) {
        uint64_t fixed = report.gauge_fixed.contains(e) ? report.gauge_fixed.at(e) : 0;
        uint64_t raw = report.ungauged.contains(e) ? report.ungauged.at(e) : 0;
        if (raw != fixed * report.degeneracy_factor) {
            report.equivalent = false;
            report.first_mismatch = "E=" + std::to_string(e) + ": ungauged " + std::to_string(raw) + " vs gauge-fixed " +
                                    std::to_string(fixed) + " x " + std::to_string(report.degeneracy_factor);
            break;
        }
    }
    return report;
}

namespace reference {

EnergyResolvedSums enumerate_states(const Lattice &lat, const InteractionTable &table,
                                    const DisorderRealization &disorder) {
    check_inputs(lat, table, disorder);
    uint32_t bits = table.num_free_bits();
    if (bits > 20) {
        throw EnumerationTooLarge("reference enumeration is limited to 20 free bits");
    }
    Geometry geo(lat);
    EnergyResolvedSums sums = empty_sums(static_cast<uint32_t>(table.terms.size()), geo);
    SpinState state(table.num_links(), table.num_triangles());
    for (uint64_t x = 0; x < (uint64_t{1} << bits); ++x) {
        for (uint32_t i = 0; i < table.num_links(); ++i) {
            state.set_link(i, (x >> i) & 1);
        }
        for (uint32_t t = 0; t < table.num_triangles(); ++t) {
            state.set_triangle_code(t, static_cast<uint32_t>(x >> (table.num_links() + 2 * t)) & 3);
        }
        std::vector<int8_t> s = state.to_spins();
        int64_t e = energy(table, disorder, s);
        std::array<int64_t, 3> f0{0, 0, 0};
        std::array<std::complex<double>, 3> fk{};
        for (size_t i = 0; i < s.size(); ++i) {
            f0[geo.color[i]] += s[i];
            fk[geo.color[i]] += static_cast<double>(s[i]) * std::complex<double>(geo.cos_phase[i], geo.sin_phase[i]);
        }
        size_t level = static_cast<size_t>((e - sums.energy_offset) / 2);
        sums.count[level]++;
        for (int c = 0; c < 3; ++c) {
            sums.sum_f0[level][c] += f0[c];
            sums.sum_f0_sq[level][c] += f0[c] * f0[c];
            sums.sum_fk_sq[level][c] += std::norm(fk[c]);
        }
    }
    return sums;
}

}  // namespace reference

}  // namespace tscc
