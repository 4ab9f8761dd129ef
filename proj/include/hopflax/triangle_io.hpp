#ifndef HOPFLAX_TRIANGLE_IO_HPP
#define HOPFLAX_TRIANGLE_IO_HPP

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hopflax/mesh.hpp"

namespace hopflax {

namespace detail {

// Line-based reader for Triangle's ASCII formats: strips '#' comments and
// blank lines, hands back whitespace-separated tokens per line.
class TriangleFileReader {
public:
    explicit TriangleFileReader(const std::string& path) : path_(path), in_(path) {
        if (!in_) throw Error("cannot open " + path);
    }

    bool next_line(std::vector<std::string>& tokens) {
        std::string line;
        while (std::getline(in_, line)) {
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            std::istringstream ss(line);
            tokens.clear();
            std::string tok;
            while (ss >> tok) tokens.push_back(tok);
            if (!tokens.empty()) return true;
        }
        return false;
    }

    std::vector<std::string> require_line(const char* what) {
        std::vector<std::string> tokens;
        if (!next_line(tokens)) throw Error(path_ + ": unexpected end of file reading " + what);
        return tokens;
    }

    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ifstream in_;
};

inline long parse_long(const std::string& tok, const std::string& path, const char* what) {
    std::size_t pos = 0;
    long value = 0;
    try {
        value = std::stol(tok, &pos);
    } catch (const std::exception&) {
        throw Error(path + ": malformed " + what + " '" + tok + "'");
    }
    if (pos != tok.size()) throw Error(path + ": malformed " + what + " '" + tok + "'");
    return value;
}

inline double parse_double(const std::string& tok, const std::string& path, const char* what) {
    std::size_t pos = 0;
    double value = 0;
    try {
        value = std::stod(tok, &pos);
    } catch (const std::exception&) {
        throw Error(path + ": malformed " + what + " '" + tok + "'");
    }
    if (pos != tok.size()) throw Error(path + ": malformed " + what + " '" + tok + "'");
    return value;
}

} // namespace detail

/// Load a mesh from Triangle's .node/.ele ASCII files, plus an optional
/// .neigh file; without it, tri_neighbors is reconstructed from shared
/// edges. Files may be 0- or 1-based (detected from the first data line).
/// Boundary flags are always derived topologically; .node markers are
/// parsed but topology wins on conflict.
inline Mesh load_triangle_mesh(const std::string& node_path, const std::string& ele_path,
                               const std::optional<std::string>& neigh_path = std::nullopt) {
    Mesh m;
    long node_base = 0;
    {
        detail::TriangleFileReader reader(node_path);
        const auto header = reader.require_line("header");
        if (header.size() < 4) throw Error(node_path + ": malformed header (want: count dim attrs marker)");
        const long count = detail::parse_long(header[0], node_path, "vertex count");
        const long dim = detail::parse_long(header[1], node_path, "dimension");
        const long attrs = detail::parse_long(header[2], node_path, "attribute count");
        const long markers = detail::parse_long(header[3], node_path, "marker flag");
        if (count <= 0 || dim != 2 || attrs < 0 || (markers != 0 && markers != 1))
            throw Error(node_path + ": malformed header values");
        m.vertices.resize(count);
        for (long i = 0; i < count; ++i) {
            const auto line = reader.require_line("vertex");
            if (static_cast<long>(line.size()) < 3 + attrs + markers)
                throw Error(node_path + ": short vertex line");
            const long idx = detail::parse_long(line[0], node_path, "vertex index");
            if (i == 0) {
                if (idx != 0 && idx != 1) throw Error(node_path + ": first vertex index must be 0 or 1");
                node_base = idx;
            } else if (idx != node_base + i) {
                throw Error(node_path + ": vertex indices not consecutive");
            }
            m.vertices[i] = {detail::parse_double(line[1], node_path, "x coordinate"),
                             detail::parse_double(line[2], node_path, "y coordinate")};
        }
    }

    long ele_base = 0;
    {
        detail::TriangleFileReader reader(ele_path);
        const auto header = reader.require_line("header");
        if (header.size() < 3) throw Error(ele_path + ": malformed header (want: count nodes attrs)");
        const long count = detail::parse_long(header[0], ele_path, "triangle count");
        const long nodes = detail::parse_long(header[1], ele_path, "nodes per triangle");
        if (count <= 0 || nodes != 3) throw Error(ele_path + ": malformed header values");
        m.triangles.resize(count);
        for (long i = 0; i < count; ++i) {
            const auto line = reader.require_line("triangle");
            if (line.size() < 4) throw Error(ele_path + ": short triangle line");
            const long idx = detail::parse_long(line[0], ele_path, "triangle index");
            if (i == 0) {
                if (idx != 0 && idx != 1) throw Error(ele_path + ": first triangle index must be 0 or 1");
                ele_base = idx;
            } else if (idx != ele_base + i) {
                throw Error(ele_path + ": triangle indices not consecutive");
            }
            for (int d = 0; d < 3; ++d) {
                const long v = detail::parse_long(line[1 + d], ele_path, "vertex reference") - node_base;
                if (v < 0 || v >= static_cast<long>(m.vertices.size()))
                    throw Error(ele_path + ": vertex reference out of range in triangle " + std::to_string(idx));
                m.triangles[i][d] = static_cast<Index>(v);
            }
        }
    }

    bool have_neighbors = false;
    if (neigh_path) {
        detail::TriangleFileReader reader(*neigh_path);
        const auto header = reader.require_line("header");
        if (header.size() < 2) throw Error(*neigh_path + ": malformed header (want: count neighbors)");
        const long count = detail::parse_long(header[0], *neigh_path, "triangle count");
        const long per = detail::parse_long(header[1], *neigh_path, "neighbors per triangle");
        if (count != static_cast<long>(m.triangles.size()) || per != 3)
            throw Error(*neigh_path + ": malformed header values");
        m.tri_neighbors.resize(count);
        for (long i = 0; i < count; ++i) {
            const auto line = reader.require_line("neighbor triple");
            if (line.size() < 4) throw Error(*neigh_path + ": short neighbor line");
            for (int d = 0; d < 3; ++d) {
                long n = detail::parse_long(line[1 + d], *neigh_path, "neighbor reference");
                if (n != -1) {
                    n -= ele_base;
                    if (n < 0 || n >= count)
                        throw Error(*neigh_path + ": neighbor reference out of range");
                }
                m.tri_neighbors[i][d] = n == -1 ? kNone : static_cast<Index>(n);
            }
        }
        have_neighbors = true;
    }

    finalize_mesh(m, have_neighbors);
    validate_mesh(m);
    return m;
}

/// Write prefix.node/.ele/.neigh in Triangle's 1-based ASCII formats with
/// full floating-point precision, so a reload reproduces the mesh exactly.
inline void write_triangle_mesh(const Mesh& m, const std::string& prefix) {
    {
        std::ofstream out(prefix + ".node");
        if (!out) throw Error("cannot write " + prefix + ".node");
        out << m.num_vertices() << " 2 0 1\n";
        char buf[96];
        for (Index v = 0; v < m.num_vertices(); ++v) {
            std::snprintf(buf, sizeof buf, "%d %.17g %.17g %d\n", v + 1, m.vertices[v].x,
                          m.vertices[v].y, static_cast<int>(m.boundary[v]));
            out << buf;
        }
    }
    {
        std::ofstream out(prefix + ".ele");
        if (!out) throw Error("cannot write " + prefix + ".ele");
        out << m.num_triangles() << " 3 0\n";
        for (Index t = 0; t < m.num_triangles(); ++t)
            out << t + 1 << ' ' << m.triangles[t][0] + 1 << ' ' << m.triangles[t][1] + 1 << ' '
                << m.triangles[t][2] + 1 << '\n';
    }
    {
        std::ofstream out(prefix + ".neigh");
        if (!out) throw Error("cannot write " + prefix + ".neigh");
        out << m.num_triangles() << " 3\n";
        for (Index t = 0; t < m.num_triangles(); ++t) {
            out << t + 1;
            for (int d = 0; d < 3; ++d) {
                const Index n = m.tri_neighbors[t][d];
                out << ' ' << (n == kNone ? -1 : n + 1);
            }
            out << '\n';
        }
    }
}

} // namespace hopflax

#endif
