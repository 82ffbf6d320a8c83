#include "tscc/lattice.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "json.hpp"

namespace tscc {

char color_name(Color c) {
    return "ABC"[static_cast<int>(c)];
}

char kind_name(GeneratorKind k) {
    return "XYZ"[static_cast<int>(k)];
}

namespace {

int floor_div(int a, int b) {
    int q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) {
        --q;
    }
    return q;
}

int pos_mod(int a, int b) {
    int r = a % b;
    return r < 0 ? r + b : r;
}

struct Torus {
    LatticeSpec spec;

    uint32_t vertex(int u, int w) const {
        int k = floor_div(w, spec.size2);
        w -= k * spec.size2;
        u -= k * spec.shear;
        u = pos_mod(u, spec.size1);
        return static_cast<uint32_t>(u + spec.size1 * w);
    }

    static Color color(int u, int w) {
        return static_cast<Color>(pos_mod(u - w, 3));
    }
};

// Neighbor directions around a vertex, counterclockwise.
constexpr std::array<std::array<int, 2>, 6> kDirections{{{1, 0}, {0, 1}, {-1, 1}, {-1, 0}, {0, -1}, {1, -1}}};

// Face k around a vertex x (spanning directions k and k+1): anchor offset, orientation (0 up,
// 1 down), and which corner of that face sits at x.
struct FaceAroundVertex {
    int du, dw;
    int down;
    int corner;
};
constexpr std::array<FaceAroundVertex, 6> kFacesAround{{
    {0, 0, 0, 0},
    {-1, 0, 1, 0},
    {-1, 0, 0, 1},
    {-1, -1, 1, 1},
    {0, -1, 0, 2},
    {0, -1, 1, 2},
}};

// Corner offsets of the up face (u,w),(u+1,w),(u,w+1) and the down face (u+1,w),(u+1,w+1),(u,w+1).
constexpr std::array<std::array<std::array<int, 2>, 3>, 2> kFaceCorners{{
    {{{0, 0}, {1, 0}, {0, 1}}},
    {{{1, 0}, {1, 1}, {0, 1}}},
}};

Vec2 add(Vec2 a, double su, double sw) {
    return {a.u + su, a.w + sw};
}

}  // namespace

std::string LatticeSpec::check() const {
    if (size1 < 3 || size1 % 3 != 0) {
        return "linear size must be a positive multiple of 3 (got " + std::to_string(size1) +
               "); periodic three-coloring requires L mod 3 = 0";
    }
    if (size2 < 1) {
        return "second extent must be positive (got " + std::to_string(size2) + ")";
    }
    if (shear < 0 || shear >= size1) {
        return "shear must lie in [0, size1) (got " + std::to_string(shear) + ")";
    }
    if (pos_mod(shear - size2, 3) != 0) {
        return "shear - size2 must be a multiple of 3 for a consistent three-coloring";
    }
    if (size1 == size2 && shear == 0) {
        return {};
    }
    if (size1 * size2 < 3) {
        return "torus needs at least three vertices";
    }
    return {};
}

Lattice assemble_lattice(
    std::string name,
    std::optional<LatticeSpec> spec,
    std::vector<Color> vertex_colors,
    const std::vector<TriangleInput> &triangle_inputs,
    const std::vector<LinkInput> &links,
    WaveVector k_min,
    double k_min_norm) {
    Lattice lat;
    lat.name = std::move(name);
    lat.spec = spec;
    lat.vertex_colors = std::move(vertex_colors);
    lat.k_min = k_min;
    lat.k_min_norm = k_min_norm;

    uint32_t num_triangles = static_cast<uint32_t>(triangle_inputs.size());
    uint32_t n = 3 * num_triangles;
    lat.qubits.reserve(n);
    for (uint32_t t = 0; t < num_triangles; ++t) {
        for (uint8_t c = 0; c < 3; ++c) {
            uint32_t v = triangle_inputs[t].vertices[c];
            if (v >= lat.vertex_colors.size()) {
                throw LatticeError("triangle " + std::to_string(t) + " references unknown vertex " + std::to_string(v));
            }
            lat.qubits.push_back({t, c, v, triangle_inputs[t].positions[c]});
        }
    }

    auto color_of_qubit = [&](uint32_t q) { return lat.vertex_colors[lat.qubits[q].vertex]; };
    auto midpoint = [&](uint32_t a, uint32_t b) {
        Vec2 pa = lat.qubits[a].position;
        Vec2 pb = lat.qubits[b].position;
        return Vec2{(pa.u + pb.u) / 2, (pa.w + pb.w) / 2};
    };

    lat.triangles.resize(num_triangles);
    for (uint32_t t = 0; t < num_triangles; ++t) {
        Triangle &tri = lat.triangles[t];
        for (uint32_t c = 0; c < 3; ++c) {
            tri.qubits[c] = 3 * t + c;
        }
        for (uint32_t c = 0; c < 3; ++c) {
            uint32_t a = tri.qubits[c];
            uint32_t b = tri.qubits[(c + 1) % 3];
            uint32_t id = static_cast<uint32_t>(lat.generators.size());
            tri.z_generators[c] = id;
            lat.generators.push_back({id, GeneratorKind::Z, {a, b}, midpoint(a, b), color_of_qubit(a), -1});
        }
    }

    size_t num_x = 0;
    for (const auto &link : links) {
        if (link.kind == GeneratorKind::Z) {
            throw LatticeError("link inputs must be X or Y generators");
        }
        for (uint32_t q : link.qubits) {
            if (q >= n) {
                throw LatticeError("link references unknown qubit " + std::to_string(q));
            }
        }
        num_x += link.kind == GeneratorKind::X;
    }
    size_t num_y = links.size() - num_x;

    SpinRegistry &reg = lat.spins;
    reg.num_qubits = n;
    reg.spins.resize(static_cast<size_t>(num_x + num_y + n));
    reg.per_qubit.assign(n, {UINT32_MAX, UINT32_MAX, UINT32_MAX});
    uint32_t next_x = 0;
    uint32_t next_y = static_cast<uint32_t>(num_x);
    for (const auto &link : links) {
        uint32_t id = static_cast<uint32_t>(lat.generators.size());
        Color color = color_of_qubit(link.qubits[0]);
        bool is_x = link.kind == GeneratorKind::X;
        uint32_t spin = is_x ? next_x++ : next_y++;
        lat.generators.push_back({id, link.kind, link.qubits, link.position, color, spin});
        reg.spins[spin] = {is_x ? SpinKind::XLink : SpinKind::YLink, id, color, link.position};
        for (uint32_t q : link.qubits) {
            reg.per_qubit[q][is_x ? 0 : 1] = spin;
        }
    }
    uint32_t zz_base = static_cast<uint32_t>(num_x + num_y);
    for (uint32_t q = 0; q < n; ++q) {
        reg.spins[zz_base + q] = {SpinKind::ZZ, q, color_of_qubit(q), lat.qubits[q].position};
        reg.per_qubit[q][2] = zz_base + q;
    }
    for (const Triangle &tri : lat.triangles) {
        reg.constraint_groups.push_back(
            {zz_base + tri.qubits[0], zz_base + tri.qubits[1], zz_base + tri.qubits[2]});
    }
    return lat;
}

Lattice build_lattice(const LatticeSpec &spec) {
    if (std::string err = spec.check(); !err.empty()) {
        throw LatticeError("invalid lattice spec: " + err);
    }
    Torus torus{spec};
    int nv = spec.num_vertices();

    std::vector<Color> colors(nv);
    for (int w = 0; w < spec.size2; ++w) {
        for (int u = 0; u < spec.size1; ++u) {
            colors[torus.vertex(u, w)] = Torus::color(u, w);
        }
    }

    // Face 2v + s: s = 0 up, s = 1 down, anchored at canonical vertex v = (u, w).
    std::vector<TriangleInput> faces(2 * nv);
    for (int w = 0; w < spec.size2; ++w) {
        for (int u = 0; u < spec.size1; ++u) {
            uint32_t v = torus.vertex(u, w);
            for (int s = 0; s < 2; ++s) {
                TriangleInput &face = faces[2 * v + s];
                std::array<Vec2, 3> corners;
                for (int c = 0; c < 3; ++c) {
                    int cu = u + kFaceCorners[s][c][0];
                    int cw = w + kFaceCorners[s][c][1];
                    face.vertices[c] = torus.vertex(cu, cw);
                    corners[c] = Vec2{static_cast<double>(cu), static_cast<double>(cw)};
                }
                for (int c = 0; c < 3; ++c) {
                    const Vec2 &p = corners[c];
                    const Vec2 &a = corners[(c + 1) % 3];
                    const Vec2 &b = corners[(c + 2) % 3];
                    face.positions[c] = add(p, 0.25 * (a.u + b.u - 2 * p.u), 0.25 * (a.w + b.w - 2 * p.w));
                }
            }
        }
    }

    // Around each vertex the six corner qubits form a ring; consecutive corners are joined
    // across the shared edge, alternating X and Y.
    std::vector<LinkInput> links;
    links.reserve(6 * nv);
    for (int w = 0; w < spec.size2; ++w) {
        for (int u = 0; u < spec.size1; ++u) {
            std::array<uint32_t, 6> ring;
            for (int k = 0; k < 6; ++k) {
                const auto &f = kFacesAround[k];
                uint32_t anchor = torus.vertex(u + f.du, w + f.dw);
                ring[k] = 3 * (2 * anchor + f.down) + f.corner;
            }
            for (int k = 0; k < 6; ++k) {
                const auto &d0 = kDirections[k];
                const auto &d1 = kDirections[(k + 1) % 6];
                const auto &d2 = kDirections[(k + 2) % 6];
                Vec2 pos{u + 0.125 * (d0[0] + 2 * d1[0] + d2[0]), w + 0.125 * (d0[1] + 2 * d1[1] + d2[1])};
                links.push_back({k % 2 == 0 ? GeneratorKind::X : GeneratorKind::Y, {ring[k], ring[(k + 1) % 6]}, pos});
            }
        }
    }

    double two_pi = 2 * std::numbers::pi;
    WaveVector k_min{two_pi / spec.size1, -two_pi * spec.shear / (static_cast<double>(spec.size1) * spec.size2)};
    std::string name = spec.size1 == spec.size2 && spec.shear == 0
                           ? "triangular L=" + std::to_string(spec.size1)
                           : "triangular torus " + std::to_string(spec.size1) + "x" + std::to_string(spec.size2) +
                                 " shear " + std::to_string(spec.shear);
    Lattice lat = assemble_lattice(std::move(name), spec, std::move(colors), faces, links, k_min, two_pi / spec.size1);
    if (auto violations = validate_lattice(lat); !violations.empty()) {
        throw LatticeError("lattice construction violated: " + violations.front().constraint);
    }
    return lat;
}

std::vector<Violation> validate_lattice(const Lattice &lat) {
    std::vector<Violation> out;
    auto fail = [&](std::string what, std::vector<uint32_t> ids) { out.push_back({std::move(what), std::move(ids)}); };

    uint32_t n = lat.num_qubits();
    if (n != 3 * lat.num_triangles()) {
        fail("qubit count is not three per triangle", {n, lat.num_triangles()});
        return out;
    }
    if (n % 2 != 0) {
        fail("odd qubit count cannot pair into links", {n});
    }
    for (uint32_t t = 0; t < lat.num_triangles(); ++t) {
        for (uint32_t c = 0; c < 3; ++c) {
            uint32_t q = lat.triangles[t].qubits[c];
            if (q >= n || lat.qubits[q].triangle != t || lat.qubits[q].corner != c) {
                fail("triangle/qubit cross reference broken", {t, q});
            }
        }
    }
    for (const QubitSite &q : lat.qubits) {
        if (q.vertex >= lat.vertex_colors.size()) {
            fail("qubit references unknown vertex", {q.vertex});
            return out;
        }
    }

    std::vector<std::array<int, 3>> degree(n, {0, 0, 0});
    for (size_t g = 0; g < lat.generators.size(); ++g) {
        const GaugeGenerator &gen = lat.generators[g];
        uint32_t gid = static_cast<uint32_t>(g);
        if (gen.id != g) {
            fail("generator id out of order", {gid});
        }
        auto [a, b] = gen.qubits;
        if (a >= n || b >= n || a == b) {
            fail("generator references invalid qubit pair", {gid});
            continue;
        }
        degree[a][static_cast<int>(gen.kind)]++;
        degree[b][static_cast<int>(gen.kind)]++;
        bool same_triangle = lat.qubits[a].triangle == lat.qubits[b].triangle;
        if (gen.kind == GeneratorKind::Z && !same_triangle) {
            fail("Z generator spans two triangles", {gid, a, b});
        }
        if (gen.kind != GeneratorKind::Z && same_triangle) {
            fail("link generator inside one triangle", {gid, a, b});
        }
        Color ca = lat.vertex_colors[lat.qubits[a].vertex];
        Color cb = lat.vertex_colors[lat.qubits[b].vertex];
        if (gen.kind != GeneratorKind::Z && ca != cb) {
            fail("link joins qubits of different colors", {gid, a, b});
        }
        if (gen.kind != GeneratorKind::Z && gen.color != ca) {
            fail("generator color differs from its qubits", {gid});
        }
    }
    for (uint32_t q = 0; q < n; ++q) {
        if (degree[q] != std::array<int, 3>{1, 1, 2}) {
            fail("qubit degree is not {Z, Z, X, Y}", {q});
        }
    }

    for (uint32_t t = 0; t < lat.num_triangles(); ++t) {
        const Triangle &tri = lat.triangles[t];
        std::array<bool, 3> seen{false, false, false};
        for (uint32_t q : tri.qubits) {
            if (q < n) {
                seen[static_cast<int>(lat.vertex_colors[lat.qubits[q].vertex])] = true;
            }
        }
        if (!(seen[0] && seen[1] && seen[2])) {
            fail("adjacent vertices share color", {t});
        }
        for (uint32_t z : tri.z_generators) {
            if (z >= lat.generators.size() || lat.generators[z].kind != GeneratorKind::Z ||
                lat.qubits[lat.generators[z].qubits[0]].triangle != t) {
                fail("triangle lists a foreign Z generator", {t, z});
            }
        }
    }

    const SpinRegistry &reg = lat.spins;
    size_t num_x = 0, num_y = 0, num_zz = 0;
    for (const SpinInfo &s : reg.spins) {
        num_x += s.kind == SpinKind::XLink;
        num_y += s.kind == SpinKind::YLink;
        num_zz += s.kind == SpinKind::ZZ;
    }
    if (reg.num_qubits != n || 2 * num_x != n || 2 * num_y != n || num_zz != n || reg.spins.size() != 2 * size_t{n}) {
        fail("spin registry counts differ from (n/2, n/2, n)", {static_cast<uint32_t>(num_x),
                                                              static_cast<uint32_t>(num_y),
                                                              static_cast<uint32_t>(num_zz)});
        return out;
    }
    std::vector<int> references(reg.spins.size(), 0);
    for (uint32_t q = 0; q < n; ++q) {
        const auto &pq = reg.per_qubit[q];
        for (int k = 0; k < 2; ++k) {
            uint32_t s = pq[k];
            if (s >= n) {
                fail("qubit lacks a link spin", {q});
                continue;
            }
            references[s]++;
            const GaugeGenerator &gen = lat.generators[reg.spins[s].source];
            SpinKind want = k == 0 ? SpinKind::XLink : SpinKind::YLink;
            if (reg.spins[s].kind != want || gen.spin != s || (gen.qubits[0] != q && gen.qubits[1] != q)) {
                fail("link spin does not belong to the qubit's generator", {q, s});
            }
            if (reg.spins[s].color != gen.color) {
                fail("spin color differs from its generator", {s});
            }
        }
        if (pq[2] != reg.zz_spin(q)) {
            fail("zz spin index is not n + qubit", {q});
        } else if (reg.spins[pq[2]].color != lat.vertex_colors[lat.qubits[q].vertex]) {
            fail("zz spin color differs from its qubit", {q});
        }
    }
    for (uint32_t s = 0; s < n; ++s) {
        if (references[s] != 2) {
            fail("link spin not referenced by exactly two qubits", {s});
        }
    }
    if (reg.constraint_groups.size() != lat.num_triangles()) {
        fail("constraint groups do not match triangles", {});
    } else {
        for (uint32_t t = 0; t < lat.num_triangles(); ++t) {
            for (int c = 0; c < 3; ++c) {
                if (reg.constraint_groups[t][c] != reg.zz_spin(lat.triangles[t].qubits[c])) {
                    fail("constraint group differs from triangle zz spins", {t});
                    break;
                }
            }
        }
    }
    std::array<size_t, 3> class_size{0, 0, 0};
    for (const SpinInfo &s : reg.spins) {
        class_size[static_cast<int>(s.color)]++;
    }
    if (class_size[0] != class_size[1] || class_size[1] != class_size[2]) {
        fail("sublattice sizes differ",
             {static_cast<uint32_t>(class_size[0]), static_cast<uint32_t>(class_size[1]),
              static_cast<uint32_t>(class_size[2])});
    }
    return out;
}

std::vector<uint32_t> sublattice_members(const Lattice &lat, Color color) {
    std::vector<uint32_t> out;
    for (uint32_t i = 0; i < lat.spins.size(); ++i) {
        if (lat.spins.spins[i].color == color) {
            out.push_back(i);
        }
    }
    return out;
}

std::string serialize_lattice(const Lattice &lat) {
    using nlohmann::json;
    json j;
    j["format"] = "tscc-lattice";
    j["version"] = 1;
    j["name"] = lat.name;
    if (lat.spec) {
        j["spec"] = {{"size1", lat.spec->size1}, {"size2", lat.spec->size2}, {"shear", lat.spec->shear}};
    } else {
        j["spec"] = nullptr;
    }
    j["k_min"] = {lat.k_min.ku, lat.k_min.kw};
    j["k_min_norm"] = lat.k_min_norm;
    std::string colors;
    for (Color c : lat.vertex_colors) {
        colors.push_back(color_name(c));
    }
    j["vertex_colors"] = colors;
    json qubits = json::array();
    for (const QubitSite &q : lat.qubits) {
        qubits.push_back({q.triangle, q.corner, q.vertex, q.position.u, q.position.w});
    }
    j["qubits"] = std::move(qubits);
    json gens = json::array();
    for (const GaugeGenerator &g : lat.generators) {
        gens.push_back({std::string(1, kind_name(g.kind)), g.qubits[0], g.qubits[1], g.position.u, g.position.w,
                        std::string(1, color_name(g.color)), g.spin});
    }
    j["generators"] = std::move(gens);
    json tris = json::array();
    for (const Triangle &t : lat.triangles) {
        tris.push_back({t.qubits[0], t.qubits[1], t.qubits[2], t.z_generators[0], t.z_generators[1], t.z_generators[2]});
    }
    j["triangles"] = std::move(tris);
    json spins = json::array();
    for (const SpinInfo &s : lat.spins.spins) {
        static constexpr const char *kinds[] = {"x", "y", "zz"};
        spins.push_back({kinds[static_cast<int>(s.kind)], s.source, std::string(1, color_name(s.color)), s.position.u,
                         s.position.w});
    }
    j["spins"] = std::move(spins);
    j["per_qubit"] = lat.spins.per_qubit;
    j["constraint_groups"] = lat.spins.constraint_groups;
    return j.dump() + "\n";
}

}  // namespace tscc
