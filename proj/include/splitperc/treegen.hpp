#pragma once

// Random split trees: construction (recursive multinomial splitting, or
// ball-by-ball insertion) and the per-tree statistics built on top of it.

#include "splitperc/error.hpp"
#include "splitperc/rng.hpp"
#include "splitperc/sampling.hpp"
#include "splitperc/splitvec.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ranges>
#include <ostream>
#include <span>
#include <tuple>
#include <vector>

namespace splitperc {

using VertexId = std::int32_t;
inline constexpr VertexId kNoVertex = -1;

/// Largest ball count accepted by the constructors.
inline constexpr std::int64_t kMaxBalls = std::numeric_limits<std::int32_t>::max();

/// Index-arena split tree. Vertex ids are allocation ordered: a parent
/// always has a smaller id than its children, and the children of a vertex
/// occupy the contiguous id range [first_child, first_child + child_count)
/// in split-vector coordinate order.
struct SplitTree {
    SplitParams params;
    std::int64_t n = 0;

    std::vector<VertexId> parent;
    std::vector<std::int32_t> depth;
    std::vector<VertexId> first_child;
    std::vector<std::uint8_t> child_count;
    std::vector<std::int32_t> held;            // C(u)
    std::vector<std::int64_t> subtree_balls;   // n_u
    std::vector<double> path_product;          // nhat_u, empty unless requested

    std::size_t size() const noexcept { return parent.size(); }
    bool has_path_product() const noexcept { return !path_product.empty(); }

    std::span<const VertexId> parents() const noexcept { return parent; }

    bool is_leaf(VertexId u) const noexcept { return child_count[std::size_t(u)] == 0; }

    /// Children of u as an id range.
    auto children(VertexId u) const noexcept {
        const VertexId first = first_child[std::size_t(u)];
        return std::views::iota(first, first + VertexId(child_count[std::size_t(u)]));
    }

    VertexId add_vertex(VertexId par, std::int32_t d, std::int64_t balls, double nhat,
                        bool keep_nhat) {
        if (parent.size() >= std::size_t(std::numeric_limits<VertexId>::max()))
            throw BudgetExceeded("split tree exceeds the vertex-id capacity");
        parent.push_back(par);
        depth.push_back(d);
        first_child.push_back(kNoVertex);
        child_count.push_back(0);
        held.push_back(0);
        subtree_balls.push_back(balls);
        if (keep_nhat) path_product.push_back(nhat);
        return VertexId(parent.size() - 1);
    }
};

enum class BuildMode { recursive_multinomial, ball_by_ball };

struct BuildOptions {
    BuildMode mode = BuildMode::recursive_multinomial;
    bool store_path_product = false;
};

namespace detail {

inline void check_build_inputs(const SplitParams& params, std::int64_t n) {
    validate_params(params);
    if (n < 1) throw ValidationError("a split tree needs at least one ball");
    if (n > kMaxBalls) throw BudgetExceeded("ball count exceeds the supported capacity");
}

inline SplitTree build_recursive(const SplitParams& params, std::int64_t n, Rng& rng,
                                 bool keep_nhat) {
    SplitTree tree;
    tree.params = params;
    tree.n = n;
    const auto b = std::size_t(params.b);
    const std::int64_t fixed = std::int64_t(params.s0) + std::int64_t(params.b) * params.s1;

    tree.add_vertex(kNoVertex, 0, n, double(n), keep_nhat);
    std::vector<VertexId> stack{0};
    std::vector<double> split(b);
    std::vector<std::int64_t> counts(b);

    while (!stack.empty()) {
        const VertexId u = stack.back();
        stack.pop_back();
        const auto ui = std::size_t(u);
        const std::int64_t nu = tree.subtree_balls[ui];
        if (nu <= params.s) {
            tree.held[ui] = std::int32_t(nu);
            continue;
        }
        tree.held[ui] = params.s0;
        sample_split_vector(params.family, rng, split);
        multinomial(rng, nu - fixed, split, counts);

        const double nhat_u = keep_nhat ? tree.path_product[ui] : 0.0;
        const std::int32_t child_depth = tree.depth[ui] + 1;
        VertexId first = kNoVertex;
        std::uint8_t made = 0;
        for (std::size_t i = 0; i < b; ++i) {
            const std::int64_t nv = counts[i] + params.s1;
            if (nv == 0) continue;
            const VertexId v = tree.add_vertex(u, child_depth, nv, nhat_u * split[i], keep_nhat);
            if (first == kNoVertex) first = v;
            ++made;
        }
        tree.first_child[ui] = first;
        tree.child_count[ui] = made;
        // Children are pushed in reverse so they pop in coordinate order.
        for (std::uint8_t k = made; k-- > 0;) stack.push_back(first + k);
    }
    return tree;
}

// Lazily materialised vertex of the infinite b-ary tree.
struct LazyVertex {
    VertexId parent = kNoVertex;
    std::int32_t depth = 0;
    std::int32_t balls = 0;
    bool internal = false;
    double nhat = 0.0;
    std::vector<VertexId> child;   // one slot per coordinate, kNoVertex if absent
    std::vector<double> split;
};

inline SplitTree build_ball_by_ball(const SplitParams& params, std::int64_t n, Rng& rng,
                                    bool keep_nhat) {
    const auto b = std::size_t(params.b);
    std::vector<LazyVertex> arena;
    auto create = [&](VertexId par, std::size_t slot) {
        LazyVertex v;
        v.parent = par;
        v.child.assign(b, kNoVertex);
        v.split = sample_split_vector(params.family, rng);
        if (par == kNoVertex) {
            v.nhat = double(n);
        } else {
            const auto& p = arena[std::size_t(par)];
            v.depth = p.depth + 1;
            v.nhat = p.nhat * p.split[slot];
        }
        arena.push_back(std::move(v));
        const auto id = VertexId(arena.size() - 1);
        if (par != kNoVertex) arena[std::size_t(par)].child[slot] = id;
        return id;
    };
    auto pick_child = [&](VertexId u) {
        const auto& split = arena[std::size_t(u)].split;
        const double x = rng.uniform01();
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < b; ++i) {
            acc += split[i];
            if (x < acc) return i;
        }
        return b - 1;
    };
    auto child_of = [&](VertexId u, std::size_t slot) {
        VertexId c = arena[std::size_t(u)].child[slot];
        return c == kNoVertex ? create(u, slot) : c;
    };

    create(kNoVertex, 0);
    std::vector<VertexId> overflow;
    std::vector<std::int64_t> incoming(b);
    for (std::int64_t ball = 0; ball < n; ++ball) {
        VertexId u = 0;
        while (arena[std::size_t(u)].internal) u = child_of(u, pick_child(u));
        if (arena[std::size_t(u)].balls < params.s) {
            ++arena[std::size_t(u)].balls;
            continue;
        }
        // Leaf at capacity: s + 1 balls are redistributed, and any child that
        // ends up above capacity splits in turn.
        arena[std::size_t(u)].balls = params.s + 1;
        overflow.assign(1, u);
        while (!overflow.empty()) {
            const VertexId w = overflow.back();
            overflow.pop_back();
            const std::int32_t total = arena[std::size_t(w)].balls;
            std::fill(incoming.begin(), incoming.end(), std::int64_t(params.s1));
            for (std::int32_t k = 0; k < total - params.s0 - params.b * params.s1; ++k)
                ++incoming[pick_child(w)];
            arena[std::size_t(w)].balls = params.s0;
            arena[std::size_t(w)].internal = true;
            for (std::size_t i = 0; i < b; ++i) {
                if (incoming[i] == 0) continue;
                const VertexId c = child_of(w, i);
                arena[std::size_t(c)].balls = std::int32_t(incoming[i]);
                if (incoming[i] > params.s) overflow.push_back(c);
            }
        }
    }

    // Breadth-first renumbering gives contiguous child ranges.
    SplitTree tree;
    tree.params = params;
    tree.n = n;
    std::vector<VertexId> order{0};
    order.reserve(arena.size());
    for (std::size_t head = 0; head < order.size(); ++head)
        for (VertexId c : arena[std::size_t(order[head])].child)
            if (c != kNoVertex) order.push_back(c);
    std::vector<VertexId> new_id(arena.size(), kNoVertex);
    for (std::size_t i = 0; i < order.size(); ++i) new_id[std::size_t(order[i])] = VertexId(i);
    for (VertexId old : order) {
        const auto& v = arena[std::size_t(old)];
        const VertexId par = v.parent == kNoVertex ? kNoVertex : new_id[std::size_t(v.parent)];
        const VertexId id = tree.add_vertex(par, v.depth, 0, v.nhat, keep_nhat);
        tree.held[std::size_t(id)] = v.balls;
        if (par != kNoVertex) {
            auto& first = tree.first_child[std::size_t(par)];
            if (first == kNoVertex) first = id;
            ++tree.child_count[std::size_t(par)];
        }
    }
    for (std::size_t i = tree.size(); i-- > 0;) {
        tree.subtree_balls[i] += tree.held[i];
        if (tree.parent[i] != kNoVertex)
            tree.subtree_balls[std::size_t(tree.parent[i])] += tree.subtree_balls[i];
    }
    return tree;
}

} // namespace detail

/// Builds a random split tree holding n balls.
inline SplitTree build_tree(const SplitParams& params, std::int64_t n, Rng& rng,
                            BuildOptions options = {}) {
    detail::check_build_inputs(params, n);
    if (options.mode == BuildMode::ball_by_ball)
        return detail::build_ball_by_ball(params, n, rng, options.store_path_product);
    return detail::build_recursive(params, n, rng, options.store_path_product);
}

inline SplitTree build_tree(const SplitParams& params, std::int64_t n, std::uint64_t seed,
                            BuildOptions options = {}) {
    Rng rng(seed);
    return build_tree(params, n, rng, options);
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

struct TreeStats {
    std::int64_t vertex_count = 0;   // N
    std::int64_t ball_path_length = 0;   // Psi
    std::int64_t vertex_path_length = 0; // Upsilon
    std::int32_t height = 0;
    std::vector<std::int64_t> ball_depth_histogram;
    std::vector<std::int64_t> vertex_depth_histogram;
};

inline TreeStats tree_stats(const SplitTree& tree) {
    TreeStats st;
    st.vertex_count = std::int64_t(tree.size());
    for (std::size_t u = 0; u < tree.size(); ++u) st.height = std::max(st.height, tree.depth[u]);
    st.ball_depth_histogram.assign(std::size_t(st.height) + 1, 0);
    st.vertex_depth_histogram.assign(std::size_t(st.height) + 1, 0);
    for (std::size_t u = 0; u < tree.size(); ++u) {
        const auto d = std::size_t(tree.depth[u]);
        st.ball_depth_histogram[d] += tree.held[u];
        st.vertex_depth_histogram[d] += 1;
        st.ball_path_length += std::int64_t(tree.held[u]) * tree.depth[u];
        st.vertex_path_length += tree.depth[u];
    }
    return st;
}

struct ProfileEntry {
    VertexId vertex;
    std::int64_t balls;   // n_v
    double nhat;          // n * product of split coordinates along the path; NaN if not stored
};

/// Vertices at depth k with their subtree ball counts. Empty when k exceeds the height.
inline std::vector<ProfileEntry> subtree_profile(const SplitTree& tree, std::int32_t k) {
    if (k < 0) throw ValidationError("profile depth must be non-negative");
    std::vector<ProfileEntry> out;
    for (std::size_t u = 0; u < tree.size(); ++u) {
        if (tree.depth[u] != k) continue;
        const double nhat = tree.has_path_product() ? tree.path_product[u]
                                                    : std::numeric_limits<double>::quiet_NaN();
        out.push_back({VertexId(u), tree.subtree_balls[u], nhat});
    }
    return out;
}

/// Draws balls uniformly: vertex u is chosen with probability C(u)/n.
class BallPicker {
public:
    explicit BallPicker(const SplitTree& tree) : tree_(&tree), cumulative_(tree.size()) {
        std::int64_t acc = 0;
        for (std::size_t u = 0; u < tree.size(); ++u) cumulative_[u] = (acc += tree.held[u]);
    }

    VertexId pick(Rng& rng) const {
        const auto target = std::int64_t(rng.below(std::uint64_t(tree_->n)));
        const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
        return VertexId(it - cumulative_.begin());
    }

    std::int32_t depth(Rng& rng) const { return tree_->depth[std::size_t(pick(rng))]; }

private:
    const SplitTree* tree_;
    std::vector<std::int64_t> cumulative_;
};

/// Depth of a uniformly chosen ball.
inline std::int32_t sample_ball_depth(const SplitTree& tree, Rng& rng) {
    return BallPicker(tree).depth(rng);
}

/// Last common ancestor of two vertices.
inline VertexId last_common_ancestor(const SplitTree& tree, VertexId u, VertexId v) {
    while (tree.depth[std::size_t(u)] > tree.depth[std::size_t(v)]) u = tree.parent[std::size_t(u)];
    while (tree.depth[std::size_t(v)] > tree.depth[std::size_t(u)]) v = tree.parent[std::size_t(v)];
    while (u != v) {
        u = tree.parent[std::size_t(u)];
        v = tree.parent[std::size_t(v)];
    }
    return u;
}

struct BallPair {
    VertexId first;
    VertexId second;
    std::int32_t lca_depth;
};

inline BallPair sample_ball_pair(const SplitTree& tree, const BallPicker& picker, Rng& rng) {
    const VertexId a = picker.pick(rng);
    const VertexId b = picker.pick(rng);
    return {a, b, tree.depth[std::size_t(last_common_ancestor(tree, a, b))]};
}

/// Depth of the last common ancestor of two independent uniform balls.
inline std::int32_t lca_depth(const SplitTree& tree, Rng& rng) {
    const BallPicker picker(tree);
    return sample_ball_pair(tree, picker, rng).lca_depth;
}

/// Line-delimited debug dump: "id parent depth C n_u" per vertex.
inline void dump_tree(const SplitTree& tree, std::ostream& os) {
    for (std::size_t u = 0; u < tree.size(); ++u)
        os << u << ' ' << tree.parent[u] << ' ' << tree.depth[u] << ' ' << tree.held[u] << ' '
           << tree.subtree_balls[u] << '\n';
}

} // namespace splitperc
