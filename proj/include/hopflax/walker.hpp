#ifndef HOPFLAX_WALKER_HPP
#define HOPFLAX_WALKER_HPP

#include <array>
#include <cstdint>

#include "hopflax/mesh.hpp"

namespace hopflax {

/// Outcome of one minimization over grid nodes. `steps` counts the fresh
/// objective evaluations performed (cache hits within the same minimization
/// are free).
struct WalkResult {
    Index argmin_index = kNone;
    double min_value = 0.0;
    long steps = 0;
};

/// Per-worker reusable buffers for the descent walks. Visited marks and the
/// per-minimization objective cache are invalidated by bumping generation
/// stamps, so clearing is O(1). Not thread-safe: use one instance per worker.
class WalkScratch {
public:
    void bind(std::size_t vertex_count) {
        if (visit_stamp_.size() != vertex_count) {
            visit_stamp_.assign(vertex_count, 0);
            value_stamp_.assign(vertex_count, 0);
            cached_value_.assign(vertex_count, 0.0);
            walk_gen_ = 0;
            minimization_gen_ = 0;
        }
    }

    /// Invalidates the objective cache; call whenever the objective changes.
    void begin_minimization() { ++minimization_gen_; }

    /// Objective value of v within the current minimization, computed at most
    /// once (used by refinement to reuse values the walks already touched).
    template <class Objective>
    double lookup_or_eval(Index v, Objective&& objective) {
        if (value_stamp_[v] == minimization_gen_) return cached_value_[v];
        const double f = objective(v);
        value_stamp_[v] = minimization_gen_;
        cached_value_[v] = f;
        return f;
    }

    std::size_t size() const { return visit_stamp_.size(); }

private:
    template <class Objective>
    friend WalkResult detail_walk_from(const Mesh&, Objective&&, Index, WalkScratch&);

    std::vector<std::int64_t> visit_stamp_;
    std::vector<std::int64_t> value_stamp_;
    std::vector<double> cached_value_;
    std::vector<Index> nbr_buf_;
    std::int64_t walk_gen_ = 0;
    std::int64_t minimization_gen_ = 0;
};

/// One walk within the current minimization generation (internal: callers
/// normally use walk_descent / multi_seed_minimize / warm_start_minimize).
template <class Objective>
WalkResult detail_walk_from(const Mesh& m, Objective&& objective, Index seed, WalkScratch& scratch) {
    const std::int64_t walk = ++scratch.walk_gen_;
    const std::int64_t gen = scratch.minimization_gen_;
    long fresh = 0;

    auto eval = [&](Index v) {
        if (scratch.value_stamp_[v] == gen) return scratch.cached_value_[v];
        const double f = objective(v);
        scratch.value_stamp_[v] = gen;
        scratch.cached_value_[v] = f;
        ++fresh;
        return f;
    };

    Index cur = seed;
    double cur_val = eval(cur);
    scratch.visit_stamp_[cur] = walk;

    long moves = 0;
    const long budget = m.num_vertices();
    while (true) {
        Index best = cur;
        double best_val = cur_val;
        vertex_neighbors(m, cur, scratch.nbr_buf_);
        for (const Index u : scratch.nbr_buf_) {
            if (scratch.visit_stamp_[u] == walk) continue; // already seen this walk
            scratch.visit_stamp_[u] = walk;
            const double val = eval(u);
            // move only on strict improvement over the current node;
            // among improvers: lowest value, then lowest index
            if (val < best_val || (val == best_val && best != cur && u < best)) {
                best = u;
                best_val = val;
            }
        }
        if (best == cur) return {cur, cur_val, fresh};
        cur = best;
        cur_val = best_val;
        if (++moves > budget)
            throw Error("walk_descent: step budget exceeded (strict descent cannot cycle)");
    }
}

/// Local descent over the vertex graph: repeatedly evaluate the objective on
/// the current vertex and its neighbors and move to the strict minimizer
/// (lowest index on ties among improvers; a neighbor merely equal to the
/// current value does not trigger a move). Returns a local minimum of the
/// objective restricted to the graph.
template <class Objective>
WalkResult walk_descent(const Mesh& m, Objective&& objective, Index seed, WalkScratch& scratch) {
    scratch.bind(m.vertices.size());
    scratch.begin_minimization();
    return detail_walk_from(m, objective, seed, scratch);
}

/// Runs walk_descent from the four displacement seeds of home vertex j
/// (duplicates collapsed, fixed direction order) and returns the best result:
/// lowest value, lowest index on ties. Objective values are shared between
/// the walks, so `steps` counts distinct vertices evaluated.
template <class Objective>
WalkResult multi_seed_minimize(const Mesh& m, Objective&& objective, Index j, const SeedTable& seeds,
                               WalkScratch& scratch) {
    scratch.bind(m.vertices.size());
    scratch.begin_minimization();

    std::array<Index, 4> start{};
    int n_start = 0;
    for (int d = 0; d < 4; ++d) {
        const Index s = seeds.seeds[d][j];
        bool dup = false;
        for (int e = 0; e < n_start; ++e) dup |= (start[e] == s);
        if (!dup) start[n_start++] = s;
    }

    WalkResult best;
    long total_steps = 0;
    for (int d = 0; d < n_start; ++d) {
        const WalkResult r = detail_walk_from(m, objective, start[d], scratch);
        total_steps += r.steps;
        if (d == 0 || r.min_value < best.min_value ||
            (r.min_value == best.min_value && r.argmin_index < best.argmin_index))
            best = r;
    }
    best.steps = total_steps;
    return best;
}

/// Single walk seeded at the previous step's argmin. Only sound when the
/// objective has a unique basin (convex solutions); callers opt in.
template <class Objective>
WalkResult warm_start_minimize(const Mesh& m, Objective&& objective, Index prev_argmin,
                               WalkScratch& scratch) {
    scratch.bind(m.vertices.size());
    scratch.begin_minimization();
    return detail_walk_from(m, objective, prev_argmin, scratch);
}

} // namespace hopflax

#endif
