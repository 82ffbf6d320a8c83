#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tscc {

enum class Color : uint8_t { A = 0, B = 1, C = 2 };
enum class GeneratorKind : uint8_t { X = 0, Y = 1, Z = 2 };
enum class SpinKind : uint8_t { XLink = 0, YLink = 1, ZZ = 2 };

constexpr std::array<Color, 3> all_colors{Color::A, Color::B, Color::C};

char color_name(Color c);
char kind_name(GeneratorKind k);

/// Point in rhombic lattice coordinates: position = u * a1 + w * a2 with a1 = (1, 0) and
/// a2 = (1/2, sqrt(3)/2).
struct Vec2 {
    double u = 0;
    double w = 0;
    bool operator==(const Vec2 &) const = default;
};

/// Wave vector in the dual of the rhombic basis; the phase of a point R is u * ku + w * kw.
struct WaveVector {
    double ku = 0;
    double kw = 0;
    double phase(Vec2 r) const {
        return ku * r.u + kw * r.w;
    }
};

class LatticeError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

/// Periodic triangular lattice of vertices. Vertex (u, w) is identified with (u + size1, w) and
/// with (u + shear, w + size2). The production lattices are square (size1 = size2 = L, shear = 0);
/// the sheared form exists for the three-vertex torus used by the exact oracles.
struct LatticeSpec {
    int size1 = 0;
    int size2 = 0;
    int shear = 0;

    static LatticeSpec square(int L) {
        return {L, L, 0};
    }
    /// Smallest three-colorable torus: one vertex of each color.
    static LatticeSpec minimal() {
        return {3, 1, 1};
    }

    int linear_size() const {
        return size1;
    }
    int num_vertices() const {
        return size1 * size2;
    }
    /// Empty if valid, otherwise a description of the violated constraint.
    std::string check() const;

    bool operator==(const LatticeSpec &) const = default;
};

struct QubitSite {
    uint32_t triangle;
    uint8_t corner;   // 0..2 within the triangle
    uint32_t vertex;  // lattice vertex this qubit sits next to
    Vec2 position;
};

struct GaugeGenerator {
    uint32_t id;
    GeneratorKind kind;
    std::array<uint32_t, 2> qubits;
    Vec2 position;
    Color color;
    /// Index into the spin registry for X and Y generators; -1 for Z generators, whose spins are
    /// eliminated by gauge fixing.
    int64_t spin;
};

struct Triangle {
    std::array<uint32_t, 3> qubits;
    std::array<uint32_t, 3> z_generators;
};

struct SpinInfo {
    SpinKind kind;
    uint32_t source;  // generator id for link spins, qubit id for zz spins
    Color color;
    Vec2 position;
};

/// Ising spins of the gauge-fixed model. Layout: [0, n/2) X-link spins, [n/2, n) Y-link spins,
/// [n, 2n) zz spins with zz spin of qubit j at n + j.
struct SpinRegistry {
    uint32_t num_qubits = 0;
    std::vector<SpinInfo> spins;
    /// Per qubit: (X-link spin, Y-link spin, zz spin).
    std::vector<std::array<uint32_t, 3>> per_qubit;
    /// One triple of zz spins per triangle; their product is constrained to +1.
    std::vector<std::array<uint32_t, 3>> constraint_groups;

    uint32_t num_links() const {
        return num_qubits;
    }
    uint32_t zz_spin(uint32_t qubit) const {
        return num_qubits + qubit;
    }
    size_t size() const {
        return spins.size();
    }
};

struct Lattice {
    std::string name;
    std::optional<LatticeSpec> spec;
    std::vector<Color> vertex_colors;
    std::vector<QubitSite> qubits;
    std::vector<GaugeGenerator> generators;
    std::vector<Triangle> triangles;
    SpinRegistry spins;
    /// Smallest non-zero wave vector commensurate with the periodic cell.
    WaveVector k_min;
    /// Magnitude entering the correlation-length formula, 2 pi / L.
    double k_min_norm = 0;

    uint32_t num_qubits() const {
        return static_cast<uint32_t>(qubits.size());
    }
    uint32_t num_triangles() const {
        return static_cast<uint32_t>(triangles.size());
    }
    /// Binary degrees of freedom of the gauge-fixed model: one per link spin, two per triangle.
    uint32_t num_free_bits() const {
        return num_qubits() + 2 * num_triangles();
    }
};

/// One X or Y link as input to assemble_lattice.
struct LinkInput {
    GeneratorKind kind;
    std::array<uint32_t, 2> qubits;
    Vec2 position;
};

/// One triangle as input to assemble_lattice: the vertex and position of each corner qubit.
struct TriangleInput {
    std::array<uint32_t, 3> vertices;
    std::array<Vec2, 3> positions;
};

/// Builds generators, triangles and the spin registry from raw geometry. Qubit 3t + c is corner c of
/// triangle t. Z generators are created for each triangle in the order (c0,c1), (c1,c2), (c2,c0).
/// Links are numbered in input order, X-link spins in the order the X links appear, likewise Y.
Lattice assemble_lattice(
    std::string name,
    std::optional<LatticeSpec> spec,
    std::vector<Color> vertex_colors,
    const std::vector<TriangleInput> &triangles,
    const std::vector<LinkInput> &links,
    WaveVector k_min,
    double k_min_norm);

/// Periodic triangular lattice with three qubits in every triangular face and X/Y links
/// alternating around each vertex. Throws LatticeError on invalid specs.
Lattice build_lattice(const LatticeSpec &spec);

struct Violation {
    std::string constraint;
    std::vector<uint32_t> ids;
};

/// Empty iff every structural invariant holds.
std::vector<Violation> validate_lattice(const Lattice &lat);

/// Spin indices of one color class, ascending.
std::vector<uint32_t> sublattice_members(const Lattice &lat, Color color);

/// Canonical versioned text form (JSON). Byte-identical for identical lattices.
std::string serialize_lattice(const Lattice &lat);

}  // namespace tscc
