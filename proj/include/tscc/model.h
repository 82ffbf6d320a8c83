#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tscc/lattice.h"
#include "tscc/spin_state.h"

namespace tscc {

enum class Pauli : uint8_t { I = 0, X = 1, Y = 2, Z = 3 };

char pauli_name(Pauli p);
Pauli pauli_from_char(char c);

/// Pauli operator up to phase, in symplectic form.
class PauliString {
   public:
    explicit PauliString(uint32_t num_qubits);

    static PauliString single(uint32_t num_qubits, uint32_t qubit, Pauli p);
    /// sigma^p on both qubits, the form of every gauge generator.
    static PauliString pair(uint32_t num_qubits, uint32_t a, uint32_t b, Pauli p);

    void set(uint32_t qubit, Pauli p);
    Pauli get(uint32_t qubit) const;
    uint32_t num_qubits() const {
        return n_;
    }
    /// Symplectic parity x.z' + z.x' mod 2 is zero.
    bool commutes(const PauliString &other) const;

   private:
    uint32_t n_;
    std::vector<uint64_t> x_;
    std::vector<uint64_t> z_;
};

/// Single-qubit commutation shortcut; agrees with PauliString::commutes.
constexpr bool paulis_commute(Pauli a, Pauli b) {
    return a == Pauli::I || b == Pauli::I || a == b;
}

class CompileError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// -J tau_j^w s_a s_b after gauge fixing.
struct Term {
    uint32_t qubit;
    Pauli pauli;
    std::array<uint32_t, 2> spins;
};

/// -J tau_j^w prod_i s_i over the generators anticommuting with sigma_j^w, before gauge fixing.
struct RawTerm {
    uint32_t qubit;
    Pauli pauli;
    std::vector<uint32_t> generators;
};

struct InteractionTable {
    uint32_t num_qubits = 0;
    uint32_t num_spins = 0;
    double coupling = 1.0;
    /// Three per qubit, in (x, y, z) order; terms[3 j + w - 1] belongs to sigma_j^w.
    std::vector<Term> terms;
    std::vector<RawTerm> raw_terms;
    std::vector<std::array<uint32_t, 3>> constraint_groups;
    /// Spin of each generator in the registry, -1 for Z generators.
    std::vector<int64_t> generator_spin;
    std::vector<std::array<uint32_t, 3>> triangle_z_generators;

    uint32_t num_links() const {
        return num_qubits;
    }
    uint32_t num_triangles() const {
        return static_cast<uint32_t>(constraint_groups.size());
    }
    uint32_t num_free_bits() const {
        return num_qubits + 2 * num_triangles();
    }
};

/// Evaluates the anticommutation of every sigma_j^w with the gauge generators, then replaces each
/// pair of Z-generator spins meeting at qubit j by the zz spin of j. Throws CompileError if a term
/// does not reduce to a product of exactly two spins.
InteractionTable compile_interactions(const Lattice &lat);

struct DisorderRealization {
    double p = 0;
    uint64_t seed = 0;
    std::vector<Pauli> errors;
    /// tau_j^{x,y,z}; -1 iff the error on j anticommutes with sigma^w.
    std::vector<std::array<int8_t, 3>> tau;

    static DisorderRealization from_errors(double p, uint64_t seed, std::vector<Pauli> errors);

    int tau_of(const Term &t) const {
        return tau[t.qubit][static_cast<int>(t.pauli) - 1];
    }

    /// "p seed labels" with labels one character per qubit from IXYZ.
    std::string serialize() const;
    static DisorderRealization deserialize(const std::string &text);
};

/// Depolarizing channel: I with probability 1 - p, each of X, Y, Z with p / 3, i.i.d. per qubit.
DisorderRealization sample_disorder(const Lattice &lat, double p, uint64_t seed);

/// E = -J sum_j [tau^x s s + tau^y s s + tau^z s s] over the compiled terms, in units of J.
int64_t energy(const InteractionTable &table, const DisorderRealization &disorder, std::span<const int8_t> spins);
int64_t energy(const InteractionTable &table, const DisorderRealization &disorder, const SpinState &state);

struct NishimoriPoint {
    double p;
    double temperature;
    double beta;
};

/// T_N(p) = 4 J / ln[3 (1 - p) / p] for 0 < p < 3/4.
double nishimori_temperature(double p);
/// Inverse of nishimori_temperature: p = 3 / (3 + exp(4 J / T)).
double nishimori_probability(double temperature);
NishimoriPoint nishimori_point(double p);

/// Human-readable dump of the compiled table, one line per term.
std::string describe_interactions(const InteractionTable &table);

}  // namespace tscc
