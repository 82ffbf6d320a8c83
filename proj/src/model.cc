#include "tscc/model.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tscc/rng.h"

namespace tscc {

char pauli_name(Pauli p) {
    return "IXYZ"[static_cast<int>(p)];
}

Pauli pauli_from_char(char c) {
    switch (c) {
        case 'I':
            return Pauli::I;
        case 'X':
            return Pauli::X;
        case 'Y':
            return Pauli::Y;
        case 'Z':
            return Pauli::Z;
        default:
            throw std::invalid_argument(std::string("not a Pauli label: '") + c + "'");
    }
}

PauliString::PauliString(uint32_t num_qubits)
    : n_(num_qubits), x_((num_qubits + 63) / 64, 0), z_((num_qubits + 63) / 64, 0) {
}

PauliString PauliString::single(uint32_t num_qubits, uint32_t qubit, Pauli p) {
    PauliString s(num_qubits);
    s.set(qubit, p);
    return s;
}

PauliString PauliString::pair(uint32_t num_qubits, uint32_t a, uint32_t b, Pauli p) {
    PauliString s(num_qubits);
    s.set(a, p);
    s.set(b, p);
    return s;
}

void PauliString::set(uint32_t qubit, Pauli p) {
    uint64_t mask = uint64_t{1} << (qubit & 63);
    bool x = p == Pauli::X || p == Pauli::Y;
    bool z = p == Pauli::Z || p == Pauli::Y;
    x_[qubit >> 6] = x ? (x_[qubit >> 6] | mask) : (x_[qubit >> 6] & ~mask);
    z_[qubit >> 6] = z ? (z_[qubit >> 6] | mask) : (z_[qubit >> 6] & ~mask);
}

Pauli PauliString::get(uint32_t qubit) const {
    bool x = (x_[qubit >> 6] >> (qubit & 63)) & 1;
    bool z = (z_[qubit >> 6] >> (qubit & 63)) & 1;
    if (x && z) {
        return Pauli::Y;
    }
    return x ? Pauli::X : (z ? Pauli::Z : Pauli::I);
}

bool PauliString::commutes(const PauliString &other) const {
    if (other.n_ != n_) {
        throw std::invalid_argument("commutation of Pauli strings of different length");
    }
    uint64_t parity = 0;
    for (size_t k = 0; k < x_.size(); ++k) {
        parity ^= (x_[k] & other.z_[k]) ^ (z_[k] & other.x_[k]);
    }
    return std::popcount(parity) % 2 == 0;
}

namespace {

Pauli pauli_of(GeneratorKind k) {
    switch (k) {
        case GeneratorKind::X:
            return Pauli::X;
        case GeneratorKind::Y:
            return Pauli::Y;
        default:
            return Pauli::Z;
    }
}

}  // namespace

InteractionTable compile_interactions(const Lattice &lat) {
    uint32_t n = lat.num_qubits();
    InteractionTable table;
    table.num_qubits = n;
    table.num_spins = 2 * n;
    table.constraint_groups = lat.spins.constraint_groups;
    for (const Triangle &t : lat.triangles) {
        table.triangle_z_generators.push_back(t.z_generators);
    }
    table.generator_spin.reserve(lat.generators.size());
    for (const GaugeGenerator &g : lat.generators) {
        table.generator_spin.push_back(g.spin);
    }

    // Generators with disjoint support commute with sigma_j^w, so only incident ones are tested.
    std::vector<std::vector<uint32_t>> incident(n);
    std::vector<PauliString> generator_ops;
    generator_ops.reserve(lat.generators.size());
    for (uint32_t g = 0; g < lat.generators.size(); ++g) {
        const GaugeGenerator &gen = lat.generators[g];
        for (uint32_t q : gen.qubits) {
            if (q >= n) {
                throw CompileError("generator " + std::to_string(g) + " references unknown qubit " + std::to_string(q));
            }
            incident[q].push_back(g);
        }
        generator_ops.push_back(PauliString::pair(n, gen.qubits[0], gen.qubits[1], pauli_of(gen.kind)));
    }

    table.terms.reserve(3 * size_t{n});
    table.raw_terms.reserve(3 * size_t{n});
    for (uint32_t j = 0; j < n; ++j) {
        for (Pauli w : {Pauli::X, Pauli::Y, Pauli::Z}) {
            PauliString local = PauliString::single(n, j, w);
            RawTerm raw{j, w, {}};
            for (uint32_t g : incident[j]) {
                if (!local.commutes(generator_ops[g])) {
                    raw.generators.push_back(g);
                }
            }

            std::vector<uint32_t> z_gens;
            std::vector<uint32_t> spins;
            for (uint32_t g : raw.generators) {
                const GaugeGenerator &gen = lat.generators[g];
                if (gen.kind == GeneratorKind::Z) {
                    z_gens.push_back(g);
                } else if (gen.spin < 0) {
                    throw CompileError("link generator " + std::to_string(g) + " has no registry spin");
                } else {
                    spins.push_back(static_cast<uint32_t>(gen.spin));
                }
            }
            if (!z_gens.empty()) {
                // s^z s'^z for the two Z generators meeting at j becomes s_j^zz.
                bool both_at_j = z_gens.size() == 2 && lat.qubits[j].triangle < lat.triangles.size();
                if (both_at_j) {
                    const auto &tz = lat.triangles[lat.qubits[j].triangle].z_generators;
                    for (uint32_t g : z_gens) {
                        both_at_j = both_at_j && std::find(tz.begin(), tz.end(), g) != tz.end();
                    }
                }
                if (!both_at_j) {
                    throw CompileError("qubit " + std::to_string(j) + ": sigma^" + pauli_name(w) +
                                       " anticommutes with " + std::to_string(z_gens.size()) +
                                       " Z generators; gauge fixing needs the two of its triangle");
                }
                spins.push_back(lat.spins.zz_spin(j));
            }
            if (spins.size() != 2) {
                throw CompileError("qubit " + std::to_string(j) + ": sigma^" + pauli_name(w) +
                                   " term reduces to a product of " + std::to_string(spins.size()) +
                                   " spins instead of two");
            }
            std::sort(spins.begin(), spins.end());
            table.terms.push_back({j, w, {spins[0], spins[1]}});
            table.raw_terms.push_back(std::move(raw));
        }
    }
    return table;
}

DisorderRealization DisorderRealization::from_errors(double p, uint64_t seed, std::vector<Pauli> errors) {
    DisorderRealization d;
    d.p = p;
    d.seed = seed;
    d.errors = std::move(errors);
    d.tau.resize(d.errors.size());
    for (size_t j = 0; j < d.errors.size(); ++j) {
        for (int w = 0; w < 3; ++w) {
            d.tau[j][w] = paulis_commute(d.errors[j], static_cast<Pauli>(w + 1)) ? 1 : -1;
        }
    }
    return d;
}

std::string DisorderRealization::serialize() const {
    std::ostringstream out;
    out.precision(17);
    out << p << ' ' << seed << ' ';
    for (Pauli e : errors) {
        out << pauli_name(e);
    }
    return out.str();
}

DisorderRealization DisorderRealization::deserialize(const std::string &text) {
    std::istringstream in(text);
    double p;
    uint64_t seed;
    std::string labels;
    if (!(in >> p >> seed)) {
        throw std::invalid_argument("disorder record lacks p and seed");
    }
    in >> labels;
    std::vector<Pauli> errors;
    errors.reserve(labels.size());
    for (char c : labels) {
        errors.push_back(pauli_from_char(c));
    }
    return from_errors(p, seed, std::move(errors));
}

DisorderRealization sample_disorder(const Lattice &lat, double p, uint64_t seed) {
    if (!(p >= 0 && p <= 1)) {
        throw std::invalid_argument("error probability must lie in [0, 1]");
    }
    Stream rng(hash_words({seed, 0xD15EA5EULL}));
    std::vector<Pauli> errors(lat.num_qubits(), Pauli::I);
    for (Pauli &e : errors) {
        double u = rng.uniform();
        uint32_t which = rng.below(3);
        if (u < p) {
            e = static_cast<Pauli>(which + 1);
        }
    }
    return DisorderRealization::from_errors(p, seed, std::move(errors));
}

int64_t energy(const InteractionTable &table, const DisorderRealization &disorder, std::span<const int8_t> spins) {
    if (spins.size() != table.num_spins) {
        throw std::invalid_argument("spin vector has " + std::to_string(spins.size()) + " entries, expected " +
                                    std::to_string(table.num_spins));
    }
    if (disorder.tau.size() != table.num_qubits) {
        throw std::invalid_argument("disorder realization size differs from qubit count");
    }
    for (size_t t = 0; t < table.constraint_groups.size(); ++t) {
        const auto &g = table.constraint_groups[t];
        if (spins[g[0]] * spins[g[1]] * spins[g[2]] != 1) {
            throw std::invalid_argument("zz constraint violated on triangle " + std::to_string(t));
        }
    }
    int64_t e = 0;
    for (const Term &t : table.terms) {
        e -= disorder.tau_of(t) * spins[t.spins[0]] * spins[t.spins[1]];
    }
    return e;
}

int64_t energy(const InteractionTable &table, const DisorderRealization &disorder, const SpinState &state) {
    if (state.num_links() != table.num_links() || state.num_triangles() != table.num_triangles()) {
        throw std::invalid_argument("spin state dimensions differ from the interaction table");
    }
    if (disorder.tau.size() != table.num_qubits) {
        throw std::invalid_argument("disorder realization size differs from qubit count");
    }
    int64_t e = 0;
    for (const Term &t : table.terms) {
        e -= disorder.tau_of(t) * state.spin(t.spins[0]) * state.spin(t.spins[1]);
    }
    return e;
}

double nishimori_temperature(double p) {
    if (!(p > 0 && p < 0.75)) {
        throw std::domain_error("Nishimori temperature defined only for 0 < p < 3/4");
    }
    return 4.0 / std::log(3.0 * (1.0 - p) / p);
}

double nishimori_probability(double temperature) {
    if (!(temperature > 0)) {
        throw std::domain_error("temperature must be positive");
    }
    return 3.0 / (3.0 + std::exp(4.0 / temperature));
}

NishimoriPoint nishimori_point(double p) {
    double t = nishimori_temperature(p);
    return {p, t, 1.0 / t};
}

std::string describe_interactions(const InteractionTable &table) {
    std::ostringstream out;
    out << "# qubit pauli spin_a spin_b raw_generators\n";
    for (size_t k = 0; k < table.terms.size(); ++k) {
        const Term &t = table.terms[k];
        out << t.qubit << ' ' << pauli_name(t.pauli) << ' ' << t.spins[0] << ' ' << t.spins[1];
        for (uint32_t g : table.raw_terms[k].generators) {
            out << ' ' << g;
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace tscc
