#ifndef HOPFLAX_REFINE_HPP
#define HOPFLAX_REFINE_HPP

#include <optional>
#include <span>

#include "hopflax/walker.hpp"

namespace hopflax {

/// Least-squares quadratic model
///   Q(y) = 1/2 a11 y1^2 + a12 y1 y2 + 1/2 a22 y2^2 - b1 y1 - b2 y2 + c
/// in the stencil's local (shifted, scaled) coordinates. Instances produced
/// by fit_quadratic always satisfy: stencil_size >= 6 and the Hessian
/// A = [[a11,a12],[a12,a22]] positive definite.
struct QuadraticModel {
    double a11 = 0.0, a12 = 0.0, a22 = 0.0;
    double b1 = 0.0, b2 = 0.0, c = 0.0;
    int stencil_size = 0;
};

struct StencilPoint {
    Vec2 p;
    double value;
};

namespace detail {

inline constexpr double kConditionLimit = 1e12;

using Mat6 = std::array<std::array<double, 6>, 6>;

// Cyclic Jacobi diagonalization of a symmetric 6x6 matrix. Returns
// eigenvalues in eigs and accumulates rotations into V (columns are
// eigenvectors). Plenty accurate for the condition estimate and the
// pseudo-solve; the matrices here are tiny.
inline void jacobi_eigen6(Mat6 a, std::array<double, 6>& eigs, Mat6& v) {
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) v[i][j] = (i == j) ? 1.0 : 0.0;
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < 6; ++p)
            for (int q = p + 1; q < 6; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-300) break;
        for (int p = 0; p < 6; ++p)
            for (int q = p + 1; q < 6; ++q) {
                if (a[p][q] == 0.0) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double cs = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * cs;
                for (int k = 0; k < 6; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = cs * akp - sn * akq;
                    a[k][q] = sn * akp + cs * akq;
                }
                for (int k = 0; k < 6; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = cs * apk - sn * aqk;
                    a[q][k] = sn * apk + cs * aqk;
                }
                for (int k = 0; k < 6; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = cs * vkp - sn * vkq;
                    v[k][q] = sn * vkp + cs * vkq;
                }
            }
    }
    for (int i = 0; i < 6; ++i) eigs[i] = a[i][i];
}

inline void basis_row(Vec2 xi, double* row) {
    row[0] = 0.5 * xi.x * xi.x;
    row[1] = xi.x * xi.y;
    row[2] = 0.5 * xi.y * xi.y;
    row[3] = -xi.x;
    row[4] = -xi.y;
    row[5] = 1.0;
}

// Pseudoinverse (Phi^T Phi)^-1 Phi^T of the stencil's basis matrix, or
// nullopt when the normal equations are numerically singular
// (condition estimate above kConditionLimit).
inline std::optional<std::vector<double>> stencil_solve_operator(std::span<const Vec2> xi) {
    const std::size_t m = xi.size();
    std::vector<double> phi(m * 6);
    for (std::size_t l = 0; l < m; ++l) basis_row(xi[l], &phi[l * 6]);

    Mat6 g{};
    for (std::size_t l = 0; l < m; ++l)
        for (int i = 0; i < 6; ++i)
            for (int j = i; j < 6; ++j) g[i][j] += phi[l * 6 + i] * phi[l * 6 + j];
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < i; ++j) g[i][j] = g[j][i];

    std::array<double, 6> eigs;
    Mat6 v;
    jacobi_eigen6(g, eigs, v);
    double lo = eigs[0], hi = eigs[0];
    for (double e : eigs) {
        lo = std::min(lo, e);
        hi = std::max(hi, e);
    }
    if (!(lo > 0.0) || hi > kConditionLimit * lo) return std::nullopt;

    // P = V diag(1/eig) V^T Phi^T, stored row-major 6 x m
    std::vector<double> op(6 * m, 0.0);
    for (std::size_t l = 0; l < m; ++l) {
        std::array<double, 6> vtphi{};
        for (int i = 0; i < 6; ++i) {
            double s = 0.0;
            for (int k = 0; k < 6; ++k) s += v[k][i] * phi[l * 6 + k];
            vtphi[i] = s / eigs[i];
        }
        for (int i = 0; i < 6; ++i) {
            double s = 0.0;
            for (int k = 0; k < 6; ++k) s += v[i][k] * vtphi[k];
            op[i * m + l] = s;
        }
    }
    return op;
}

inline std::optional<QuadraticModel> model_from_coeffs(const std::array<double, 6>& a, int m) {
    QuadraticModel q{a[0], a[1], a[2], a[3], a[4], a[5], m};
    if (!(q.a11 > 0.0) || !(q.a11 * q.a22 - q.a12 * q.a12 > 0.0)) return std::nullopt;
    return q;
}

} // namespace detail

/// Fit the six-parameter quadratic model to the stencil values by normal
/// equations. stencil[0] is the expansion point (the walk's minimizing node):
/// coordinates are shifted to it and divided by `scale` before assembling the
/// basis matrix, which keeps the system well conditioned for small elements
/// far from the origin. The minimum *value* of the model is unaffected by
/// the change of frame. Returns nullopt (rejection, not failure) when the
/// stencil has fewer than 6 points, the normal equations are numerically
/// singular, or the fitted Hessian is not positive definite.
inline std::optional<QuadraticModel> fit_quadratic(std::span<const StencilPoint> stencil,
                                                   double scale = 1.0) {
    const int m = static_cast<int>(stencil.size());
    if (m < 6 || !(scale > 0.0)) return std::nullopt;
    const double inv = 1.0 / scale;
    std::vector<Vec2> xi(m);
    for (int l = 0; l < m; ++l) xi[l] = (stencil[l].p - stencil[0].p) * inv;
    const auto op = detail::stencil_solve_operator(xi);
    if (!op) return std::nullopt;
    std::array<double, 6> a{};
    for (int i = 0; i < 6; ++i) {
        double s = 0.0;
        for (int l = 0; l < m; ++l) s += (*op)[i * m + l] * stencil[l].value;
        a[i] = s;
    }
    return detail::model_from_coeffs(a, m);
}

/// Closed-form minimum of an accepted model:
///   min Q = (a22 b1^2 - 2 a12 b1 b2 + a11 b2^2) / (2 (a12^2 - a11 a22)) + c.
inline double quadratic_min(const QuadraticModel& q) {
    const double num = q.a22 * q.b1 * q.b1 - 2.0 * q.a12 * q.b1 * q.b2 + q.a11 * q.b2 * q.b2;
    return num / (2.0 * (q.a12 * q.a12 - q.a11 * q.a22)) + q.c;
}

/// Minimizer y* = A^-1 b (local frame), exposed for diagnostics.
inline Vec2 quadratic_argmin(const QuadraticModel& q) {
    const double det = q.a11 * q.a22 - q.a12 * q.a12;
    return {(q.a22 * q.b1 - q.a12 * q.b2) / det, (q.a11 * q.b2 - q.a12 * q.b1) / det};
}

/// Per-vertex solve operators for the refinement stencils. The operator of a
/// vertex depends only on the local grid geometry, so it is built once per
/// mesh and shared by all sweeps and workers (read-only after construction).
/// Boundary vertices and stencils that fail the fit preconditions are marked
/// unusable and fall back to the raw node value.
class StencilOperatorCache {
public:
    StencilOperatorCache(const Mesh& m, double scale) : scale_(scale) {
        const Index nv = m.num_vertices();
        offsets_.assign(nv + 1, 0);
        usable_.assign(nv, 0);
        std::vector<Index> nbrs;
        std::vector<std::vector<Index>> stencils(nv);
        for (Index v = 0; v < nv; ++v) {
            if (m.boundary[v]) continue;
            vertex_neighbors(m, v, nbrs);
            if (1 + nbrs.size() < 6) continue;
            auto& s = stencils[v];
            s.reserve(1 + nbrs.size());
            s.push_back(v);
            s.insert(s.end(), nbrs.begin(), nbrs.end());
        }
        for (Index v = 0; v < nv; ++v) offsets_[v + 1] = offsets_[v] + static_cast<Index>(stencils[v].size());
        stencil_.resize(offsets_[nv]);
        op_.resize(static_cast<std::size_t>(offsets_[nv]) * 6);
        const double inv = 1.0 / scale;
        std::vector<Vec2> xi;
        for (Index v = 0; v < nv; ++v) {
            const auto& s = stencils[v];
            if (s.empty()) continue;
            std::copy(s.begin(), s.end(), stencil_.begin() + offsets_[v]);
            xi.resize(s.size());
            for (std::size_t l = 0; l < s.size(); ++l) xi[l] = (m.vertices[s[l]] - m.vertices[v]) * inv;
            const auto op = detail::stencil_solve_operator(xi);
            if (!op) continue;
            std::copy(op->begin(), op->end(), op_.begin() + static_cast<std::size_t>(offsets_[v]) * 6);
            usable_[v] = 1;
        }
    }

    bool usable(Index v) const { return usable_[v] != 0; }
    double scale() const { return scale_; }

    int stencil_size(Index v) const { return offsets_[v + 1] - offsets_[v]; }

    std::span<const Index> stencil(Index v) const {
        return {stencil_.data() + offsets_[v], static_cast<std::size_t>(stencil_size(v))};
    }

    /// Apply the cached pseudoinverse to stencil values supplied by value_at.
    template <class ValueAt>
    std::optional<QuadraticModel> fit(Index v, ValueAt&& value_at) const {
        if (!usable(v)) return std::nullopt;
        const int m = stencil_size(v);
        const Index* s = stencil_.data() + offsets_[v];
        const double* op = op_.data() + static_cast<std::size_t>(offsets_[v]) * 6;
        std::array<double, 6> a{};
        for (int l = 0; l < m; ++l) {
            const double f = value_at(s[l]);
            for (int i = 0; i < 6; ++i) a[i] += op[i * m + l] * f;
        }
        return detail::model_from_coeffs(a, m);
    }

private:
    double scale_;
    std::vector<Index> offsets_;
    std::vector<Index> stencil_;
    std::vector<double> op_;
    std::vector<std::uint8_t> usable_;
};

/// Post-process a walk minimum with the quadratic model fitted on the
/// minimizing node's stencil. Returns min(model minimum, raw walk value);
/// the raw value passes through unchanged when the minimizer sits on the
/// boundary or the fit is rejected, so the result never exceeds
/// walk.min_value.
template <class Objective>
double refine_minimum(const Mesh& m, Objective&& objective, const WalkResult& walk) {
    const Index k = walk.argmin_index;
    if (m.boundary[k]) return walk.min_value;
    std::vector<Index> nbrs;
    vertex_neighbors(m, k, nbrs);
    std::vector<StencilPoint> stencil;
    stencil.reserve(1 + nbrs.size());
    stencil.push_back({m.vertices[k], walk.min_value});
    for (Index u : nbrs) stencil.push_back({m.vertices[u], objective(u)});
    const auto model = fit_quadratic(stencil, m.h_max > 0.0 ? m.h_max : 1.0);
    if (!model) return walk.min_value;
    return std::min(quadratic_min(*model), walk.min_value);
}

/// Cached-operator variant used inside the solvers' sweeps.
template <class ValueAt>
double refine_minimum_cached(const StencilOperatorCache& cache, const WalkResult& walk,
                             ValueAt&& value_at) {
    const auto model = cache.fit(walk.argmin_index, value_at);
    if (!model) return walk.min_value;
    return std::min(quadratic_min(*model), walk.min_value);
}

} // namespace hopflax

#endif
