#ifndef HOPFLAX_MESH_HPP
#define HOPFLAX_MESH_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <numbers>
#include <unordered_map>
#include <vector>

#include "hopflax/core.hpp"

namespace hopflax {

/// Unstructured triangular mesh described by the minimal data the scheme
/// needs: vertex coordinates, triangle index triplets, and triangle-neighbor
/// triplets. tri_neighbors[t][d] is the triangle across the edge opposite
/// local vertex d of triangle t, or kNone on the boundary.
struct Mesh {
    std::vector<Vec2> vertices;
    std::vector<std::array<Index, 3>> triangles;
    std::vector<std::array<Index, 3>> tri_neighbors;
    std::vector<Index> incident_tri;   // one triangle containing each vertex
    std::vector<std::uint8_t> boundary; // 1 iff vertex lies on a boundary edge
    double h_max = 0.0;                 // max element diameter (longest edge)

    Index num_vertices() const { return static_cast<Index>(vertices.size()); }
    Index num_triangles() const { return static_cast<Index>(triangles.size()); }
};

inline double signed_area(const Mesh& m, Index t) {
    const auto& tri = m.triangles[t];
    Vec2 a = m.vertices[tri[0]], b = m.vertices[tri[1]], c = m.vertices[tri[2]];
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

namespace detail {

inline std::uint64_t edge_key(Index a, Index b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

inline int local_index(const Mesh& m, Index t, Index v) {
    const auto& tri = m.triangles[t];
    for (int i = 0; i < 3; ++i)
        if (tri[i] == v) return i;
    throw Error("mesh: incident_tri entry does not contain its vertex");
}

} // namespace detail

/// Rebuild tri_neighbors from shared edges. Throws on a non-manifold edge
/// (more than two incident triangles).
inline void rebuild_tri_neighbors(Mesh& m) {
    m.tri_neighbors.assign(m.triangles.size(), {kNone, kNone, kNone});
    // edge -> (triangle, local vertex opposite the edge)
    std::unordered_map<std::uint64_t, std::pair<Index, int>> open_edges;
    open_edges.reserve(m.triangles.size() * 2);
    for (Index t = 0; t < m.num_triangles(); ++t) {
        const auto& tri = m.triangles[t];
        for (int d = 0; d < 3; ++d) {
            const std::uint64_t key = detail::edge_key(tri[(d + 1) % 3], tri[(d + 2) % 3]);
            auto it = open_edges.find(key);
            if (it == open_edges.end()) {
                open_edges.emplace(key, std::make_pair(t, d));
            } else if (it->second.first == kNone) {
                throw Error("mesh: non-manifold edge (shared by more than two triangles)");
            } else {
                auto [s, e] = it->second;
                m.tri_neighbors[t][d] = s;
                m.tri_neighbors[s][e] = t;
                it->second.first = kNone; // mark paired
            }
        }
    }
}

/// Derive per-vertex boundary flags: a vertex is boundary iff it belongs to
/// an edge with exactly one incident triangle.
inline void derive_boundary_flags(Mesh& m) {
    m.boundary.assign(m.vertices.size(), 0);
    for (Index t = 0; t < m.num_triangles(); ++t)
        for (int d = 0; d < 3; ++d)
            if (m.tri_neighbors[t][d] == kNone) {
                m.boundary[m.triangles[t][(d + 1) % 3]] = 1;
                m.boundary[m.triangles[t][(d + 2) % 3]] = 1;
            }
}

inline void compute_incident_tri(Mesh& m) {
    m.incident_tri.assign(m.vertices.size(), kNone);
    for (Index t = 0; t < m.num_triangles(); ++t)
        for (Index v : m.triangles[t])
            if (m.incident_tri[v] == kNone) m.incident_tri[v] = t;
}

inline double longest_edge(const Mesh& m, Index t) {
    const auto& tri = m.triangles[t];
    double e0 = norm2(m.vertices[tri[1]] - m.vertices[tri[2]]);
    double e1 = norm2(m.vertices[tri[0]] - m.vertices[tri[2]]);
    double e2 = norm2(m.vertices[tri[0]] - m.vertices[tri[1]]);
    return std::sqrt(std::max({e0, e1, e2}));
}

inline void compute_h_max(Mesh& m) {
    double h = 0.0;
    for (Index t = 0; t < m.num_triangles(); ++t) h = std::max(h, longest_edge(m, t));
    m.h_max = h;
}

/// Orient every triangle counterclockwise by flipping, rebuild whatever
/// connectivity is missing, and fill the derived fields. Triangles with zero
/// signed area cannot be repaired and raise an error.
inline void finalize_mesh(Mesh& m, bool keep_neighbors = false) {
    for (Index t = 0; t < m.num_triangles(); ++t) {
        const double a = signed_area(m, t);
        if (a == 0.0) throw Error("mesh: degenerate (zero-area) triangle " + std::to_string(t));
        if (a < 0.0) {
            std::swap(m.triangles[t][1], m.triangles[t][2]);
            if (keep_neighbors && !m.tri_neighbors.empty())
                std::swap(m.tri_neighbors[t][1], m.tri_neighbors[t][2]);
        }
    }
    if (!keep_neighbors || m.tri_neighbors.empty()) rebuild_tri_neighbors(m);
    derive_boundary_flags(m);
    compute_incident_tri(m);
    compute_h_max(m);
}

/// Check every Mesh invariant; throws with a description on the first
/// violation. Intended for loaders and tests, not hot paths.
inline void validate_mesh(const Mesh& m) {
    const Index nv = m.num_vertices(), nt = m.num_triangles();
    if (m.tri_neighbors.size() != m.triangles.size()) throw Error("mesh: tri_neighbors size mismatch");
    if (m.incident_tri.size() != m.vertices.size()) throw Error("mesh: incident_tri size mismatch");
    if (m.boundary.size() != m.vertices.size()) throw Error("mesh: boundary size mismatch");
    for (Index t = 0; t < nt; ++t) {
        for (Index v : m.triangles[t])
            if (v < 0 || v >= nv) throw Error("mesh: vertex index out of range in triangle " + std::to_string(t));
        if (signed_area(m, t) <= 0.0) throw Error("mesh: triangle " + std::to_string(t) + " not counterclockwise");
        for (int d = 0; d < 3; ++d) {
            const Index n = m.tri_neighbors[t][d];
            if (n == kNone) continue;
            if (n < 0 || n >= nt) throw Error("mesh: neighbor index out of range");
            const auto& back = m.tri_neighbors[n];
            if (std::find(back.begin(), back.end(), t) == back.end())
                throw Error("mesh: neighbor reciprocity violated between triangles " +
                            std::to_string(t) + " and " + std::to_string(n));
        }
    }
    // boundary flag iff the vertex touches an unpaired edge
    std::vector<std::uint8_t> expect(nv, 0);
    for (Index t = 0; t < nt; ++t)
        for (int d = 0; d < 3; ++d)
            if (m.tri_neighbors[t][d] == kNone) {
                expect[m.triangles[t][(d + 1) % 3]] = 1;
                expect[m.triangles[t][(d + 2) % 3]] = 1;
            }
    for (Index v = 0; v < nv; ++v) {
        if (m.boundary[v] != expect[v]) throw Error("mesh: boundary flag wrong at vertex " + std::to_string(v));
        const Index t = m.incident_tri[v];
        if (t == kNone) throw Error("mesh: isolated vertex " + std::to_string(v));
        detail::local_index(m, t, v); // throws if v not in t
    }
}

/// Append the vertices sharing an edge with v, found by rotating around v
/// through incident triangles starting at incident_tri[v]. For boundary
/// vertices the rotation runs in both directions until the kNone sentinel.
/// Cost is proportional to the vertex degree.
inline void vertex_neighbors(const Mesh& m, Index v, std::vector<Index>& out) {
    out.clear();
    const Index t0 = m.incident_tri[v];
    const Index guard = m.num_triangles() + 1;
    Index t = t0;
    Index count = 0;
    int i = 0;
    // counterclockwise sweep: each triangle contributes the vertex after v
    while (true) {
        if (++count > guard) throw Error("mesh: vertex rotation fails to terminate at vertex " + std::to_string(v));
        i = detail::local_index(m, t, v);
        out.push_back(m.triangles[t][(i + 1) % 3]);
        const Index next = m.tri_neighbors[t][(i + 1) % 3];
        if (next == t0) return; // interior vertex: fan closed, one entry per triangle
        if (next == kNone) break;
        t = next;
    }
    // boundary vertex: close this side with the forward ray, then sweep clockwise
    out.push_back(m.triangles[t][(i + 2) % 3]);
    i = detail::local_index(m, t0, v);
    t = m.tri_neighbors[t0][(i + 2) % 3];
    while (t != kNone) {
        if (++count > guard) throw Error("mesh: vertex rotation fails to close at vertex " + std::to_string(v));
        i = detail::local_index(m, t, v);
        out.push_back(m.triangles[t][(i + 1) % 3]);
        t = m.tri_neighbors[t][(i + 2) % 3];
    }
}

inline std::vector<Index> vertex_neighbors(const Mesh& m, Index v) {
    std::vector<Index> out;
    vertex_neighbors(m, v, out);
    return out;
}

/// Quasi-uniform triangulation of a disc built from concentric rings:
/// ring m sits at radius m*(radius/M) with round(2*pi*m) vertices, M chosen
/// so the outermost ring lands on the boundary. Rings are stitched by an
/// angular merge, so the longest edge stays below 2.5*h.
inline Mesh gen_disc_mesh(double radius, double h) {
    if (!(radius > 0.0) || !(h > 0.0) || !(h <= radius))
        throw Error("gen_disc_mesh: need radius > 0 and 0 < h <= radius");
    const Index rings = std::max<Index>(1, static_cast<Index>(std::llround(radius / h)));
    const double spacing = radius / rings;

    std::vector<Index> ring_count(rings + 1), ring_base(rings + 1);
    ring_count[0] = 1;
    ring_base[0] = 0;
    std::int64_t total = 1;
    for (Index r = 1; r <= rings; ++r) {
        ring_count[r] = static_cast<Index>(std::llround(2.0 * std::numbers::pi * r));
        ring_base[r] = static_cast<Index>(total);
        total += ring_count[r];
        if (total > 50'000'000) throw Error("gen_disc_mesh: h too small, vertex budget exceeded");
    }

    Mesh m;
    m.vertices.resize(total);
    m.vertices[0] = {0.0, 0.0};
    for (Index r = 1; r <= rings; ++r) {
        const double rad = spacing * r;
        const Index n = ring_count[r];
        for (Index k = 0; k < n; ++k) {
            const double ang = 2.0 * std::numbers::pi * k / n;
            m.vertices[ring_base[r] + k] = {rad * std::cos(ang), rad * std::sin(ang)};
        }
    }

    // center fan
    const Index n1 = ring_count[1];
    for (Index k = 0; k < n1; ++k)
        m.triangles.push_back({0, ring_base[1] + k, ring_base[1] + (k + 1) % n1});
    // annulus strips, merged by angle without floating point
    for (Index r = 1; r < rings; ++r) {
        const Index na = ring_count[r], nb = ring_count[r + 1];
        const Index ba = ring_base[r], bb = ring_base[r + 1];
        std::int64_t i = 0, j = 0;
        while (i < na || j < nb) {
            const bool advance_outer =
                (i == na) || (j < nb && (j + 1) * static_cast<std::int64_t>(na) <=
                                            (i + 1) * static_cast<std::int64_t>(nb));
            if (advance_outer) {
                m.triangles.push_back({ba + static_cast<Index>(i % na), bb + static_cast<Index>(j % nb),
                                       bb + static_cast<Index>((j + 1) % nb)});
                ++j;
            } else {
                m.triangles.push_back({ba + static_cast<Index>(i % na), bb + static_cast<Index>(j % nb),
                                       ba + static_cast<Index>((i + 1) % na)});
                ++i;
            }
        }
    }

    finalize_mesh(m);
    return m;
}

/// Per-vertex, per-direction nearest-vertex indices seeding the four
/// displacement walks: seeds[d][j] is the vertex closest to
/// x_j + c_coef*dt*e_d, with e_1..e_4 = (1,0), (-1,0), (0,1), (0,-1),
/// ties broken by lowest vertex index.
struct SeedTable {
    std::array<std::vector<Index>, 4> seeds;
};

/// Uniform-bin point index answering nearest-vertex queries with the same
/// lowest-index tie rule as an exhaustive scan.
class NearestVertexIndex {
public:
    explicit NearestVertexIndex(const Mesh& m) : mesh_(&m) {
        const auto& vs = m.vertices;
        lo_ = hi_ = vs.at(0);
        for (Vec2 p : vs) {
            lo_ = {std::min(lo_.x, p.x), std::min(lo_.y, p.y)};
            hi_ = {std::max(hi_.x, p.x), std::max(hi_.y, p.y)};
        }
        const double ext_x = std::max(hi_.x - lo_.x, 1e-300);
        const double ext_y = std::max(hi_.y - lo_.y, 1e-300);
        const double target = std::sqrt(ext_x * ext_y / static_cast<double>(vs.size())) * 1.5;
        cell_ = std::max(target, 1e-12);
        nx_ = std::clamp<Index>(static_cast<Index>(ext_x / cell_) + 1, 1, 2048);
        ny_ = std::clamp<Index>(static_cast<Index>(ext_y / cell_) + 1, 1, 2048);
        cell_ = std::max(ext_x / nx_, ext_y / ny_) + 1e-15;

        std::vector<Index> counts(nx_ * ny_ + 1, 0);
        std::vector<Index> cell_of(vs.size());
        for (std::size_t v = 0; v < vs.size(); ++v) {
            cell_of[v] = cell_index(vs[v]);
            ++counts[cell_of[v] + 1];
        }
        for (std::size_t c = 1; c < counts.size(); ++c) counts[c] += counts[c - 1];
        offsets_ = counts;
        items_.resize(vs.size());
        std::vector<Index> cursor(offsets_.begin(), offsets_.end() - 1);
        for (std::size_t v = 0; v < vs.size(); ++v) items_[cursor[cell_of[v]]++] = static_cast<Index>(v);
    }

    Index nearest(Vec2 p) const {
        const Index cx = clamp_cx(grid_x(p)), cy = clamp_cy(grid_y(p));
        Index best = kNone;
        double best_d2 = std::numeric_limits<double>::infinity();
        const Index max_ring = std::max(nx_, ny_);
        for (Index ring = 0; ring <= max_ring; ++ring) {
            if (best != kNone) {
                const double reach = (static_cast<double>(ring) - 1.0) * cell_;
                if (reach > 0.0 && reach * reach > best_d2) break;
            }
            scan_ring(p, cx, cy, ring, best, best_d2);
        }
        return best;
    }

private:
    Index grid_x(Vec2 p) const { return static_cast<Index>((p.x - lo_.x) / cell_); }
    Index grid_y(Vec2 p) const { return static_cast<Index>((p.y - lo_.y) / cell_); }
    Index clamp_cx(Index c) const { return std::clamp<Index>(c, 0, nx_ - 1); }
    Index clamp_cy(Index c) const { return std::clamp<Index>(c, 0, ny_ - 1); }
    Index cell_index(Vec2 p) const { return clamp_cy(grid_y(p)) * nx_ + clamp_cx(grid_x(p)); }

    void scan_cell(Vec2 p, Index cx, Index cy, Index& best, double& best_d2) const {
        const Index c = cy * nx_ + cx;
        for (Index k = offsets_[c]; k < offsets_[c + 1]; ++k) {
            const Index v = items_[k];
            const double d2 = norm2(p - mesh_->vertices[v]);
            if (d2 < best_d2 || (d2 == best_d2 && v < best)) {
                best = v;
                best_d2 = d2;
            }
        }
    }

    void scan_ring(Vec2 p, Index cx, Index cy, Index ring, Index& best, double& best_d2) const {
        if (ring == 0) {
            scan_cell(p, cx, cy, best, best_d2);
            return;
        }
        for (Index dx = -ring; dx <= ring; ++dx)
            for (Index dy = -ring; dy <= ring; ++dy) {
                if (std::max(std::abs(dx), std::abs(dy)) != ring) continue;
                const Index x = cx + dx, y = cy + dy;
                if (x < 0 || x >= nx_ || y < 0 || y >= ny_) continue;
                scan_cell(p, x, y, best, best_d2);
            }
    }

    const Mesh* mesh_;
    Vec2 lo_, hi_;
    double cell_ = 0.0;
    Index nx_ = 1, ny_ = 1;
    std::vector<Index> offsets_;
    std::vector<Index> items_;
};

inline SeedTable build_seed_table(const Mesh& m, double c_coef, double dt) {
    if (!(c_coef > 0.0) || !(dt > 0.0)) throw Error("build_seed_table: need c_coef > 0 and dt > 0");
    static constexpr Vec2 dirs[4] = {{1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}};
    const NearestVertexIndex index(m);
    SeedTable table;
    const double step = c_coef * dt;
    for (int d = 0; d < 4; ++d) {
        table.seeds[d].resize(m.vertices.size());
        for (Index j = 0; j < m.num_vertices(); ++j)
            table.seeds[d][j] = index.nearest(m.vertices[j] + step * dirs[d]);
    }
    return table;
}

} // namespace hopflax

#endif
