#pragma once

// Bernoulli bond percolation on split trees: cluster decomposition, the
// root cluster in balls and vertices, and second-largest clusters.

#include "splitperc/error.hpp"
#include "splitperc/rng.hpp"
#include "splitperc/sampling.hpp"
#include "splitperc/treegen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace splitperc {

/// p_n = 1 - c / ln n. Requires c >= 0 and ln n >= c.
inline double percolation_param(double n, double c) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw ValidationError("c must be a finite value >= 0");
    if (!(n > 1.0)) throw ValidationError("n must exceed 1");
    const double ln_n = std::log(n);
    if (c > 0.0 && !(ln_n > c))
        throw ValidationError("n must exceed e^c so that p lies in (0, 1]");
    return 1.0 - c / ln_n;
}

struct ClusterDecomposition {
    std::vector<std::int32_t> cluster_of;      // per vertex; the root's cluster is 0
    std::vector<std::int64_t> cluster_vertices;
    std::vector<std::int64_t> cluster_balls;
    std::int64_t root_balls = 0;       // G-hat
    std::int64_t root_vertices = 0;    // G
    std::int64_t second_balls = 0;     // G-hat 2nd, by ball count
    std::int64_t second_vertices = 0;  // G 2nd, by vertex count
    std::int64_t retained_edges = 0;

    std::size_t cluster_count() const noexcept { return cluster_vertices.size(); }
};

namespace detail {

// Second largest entry; ties with the largest count as a second cluster.
inline std::int64_t second_largest(const std::vector<std::int64_t>& values) {
    std::int64_t first = 0, second = 0;
    bool seen = false;
    for (std::int64_t v : values) {
        if (!seen || v > first) {
            if (seen) second = first;
            first = v;
            seen = true;
        } else if (v > second) {
            second = v;
        }
    }
    return second;
}

} // namespace detail

/// Retains each edge independently with probability p. Vertices are visited
/// in id order, which is a valid top-down traversal because parents precede
/// their children; the edge above v is decided when v is visited.
inline ClusterDecomposition percolate(const SplitTree& tree, double p, Rng& rng) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("percolation parameter must lie in [0, 1]");
    ClusterDecomposition out;
    const std::size_t n_vertices = tree.size();
    out.cluster_of.resize(n_vertices);
    out.cluster_of[0] = 0;
    out.cluster_vertices.push_back(1);
    out.cluster_balls.push_back(tree.held[0]);
    for (std::size_t v = 1; v < n_vertices; ++v) {
        std::int32_t id;
        if (rng.bernoulli(p)) {
            ++out.retained_edges;
            id = out.cluster_of[std::size_t(tree.parent[v])];
        } else {
            id = std::int32_t(out.cluster_vertices.size());
            out.cluster_vertices.push_back(0);
            out.cluster_balls.push_back(0);
        }
        out.cluster_of[v] = id;
        out.cluster_vertices[std::size_t(id)] += 1;
        out.cluster_balls[std::size_t(id)] += tree.held[v];
    }
    out.root_balls = out.cluster_balls[0];
    out.root_vertices = out.cluster_vertices[0];
    out.second_balls = detail::second_largest(out.cluster_balls);
    out.second_vertices = detail::second_largest(out.cluster_vertices);
    return out;
}

inline ClusterDecomposition percolate(const SplitTree& tree, double p, std::uint64_t seed) {
    Rng rng(seed);
    return percolate(tree, p, rng);
}

struct RootCluster {
    std::int64_t balls = 0;
    std::int64_t vertices = 0;
};

/// Samples the root cluster of a fresh percolated split tree without storing
/// the tree: subtrees hanging below a removed edge are never generated.
/// Same joint law of (G-hat, G) as build_tree followed by percolate.
inline RootCluster sample_root_cluster(const SplitParams& params, std::int64_t n, double p,
                                       Rng& rng) {
    detail::check_build_inputs(params, n);
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("percolation parameter must lie in [0, 1]");
    const auto b = std::size_t(params.b);
    const std::int64_t fixed = std::int64_t(params.s0) + std::int64_t(params.b) * params.s1;
    RootCluster out;
    std::vector<std::int64_t> stack{n};
    std::vector<double> split(b);
    std::vector<std::int64_t> counts(b);
    const bool bst = std::holds_alternative<BinarySearch>(params.family) && params.s == 1 &&
                     params.s0 == 1 && params.s1 == 0;
    while (!stack.empty()) {
        const std::int64_t nu = stack.back();
        stack.pop_back();
        ++out.vertices;
        if (nu <= params.s) {
            out.balls += nu;
            continue;
        }
        out.balls += params.s0;
        if (bst) {
            // Binomial(m, U) with U uniform is uniform on {0, ..., m}.
            counts[0] = std::int64_t(rng.below(std::uint64_t(nu)));
            counts[1] = nu - 1 - counts[0];
        } else {
            sample_split_vector(params.family, rng, split);
            multinomial(rng, nu - fixed, split, counts);
        }
        for (std::size_t i = 0; i < b; ++i) {
            const std::int64_t nv = counts[i] + params.s1;
            if (nv > 0 && rng.bernoulli(p)) stack.push_back(nv);
        }
    }
    return out;
}

struct IdentityCheck {
    double lhs = 0.0;      // mean of G-hat / n
    double rhs = 0.0;      // mean of p^{D_n(b1)}
    double pooled_stderr = 0.0;  // standard error of lhs - rhs
    double lhs_stderr = 0.0;
    double rhs_stderr = 0.0;
};

/// One replica of the identity check: G-hat / n from one percolated tree and
/// E[p^{D_n} | tree] from an independent tree. The second value averages
/// p^{depth} over every ball, the conditional expectation of p^{D_n(b1)}.
inline std::pair<double, double> identity_replica(const SplitParams& params, std::int64_t n,
                                                  double p, std::uint64_t seed, std::int64_t r) {
    Rng tree_rng(derive_seed(seed, 1, std::uint64_t(r)));
    const SplitTree t1 = build_tree(params, n, tree_rng);
    const auto dec = percolate(t1, p, derive_seed(seed, 2, std::uint64_t(r)));
    const double x = double(dec.root_balls) / double(n);

    Rng rhs_rng(derive_seed(seed, 3, std::uint64_t(r)));
    const SplitTree t2 = build_tree(params, n, rhs_rng);
    const std::vector<std::int64_t> hist = tree_stats(t2).ball_depth_histogram;
    double y = 0.0, pk = 1.0;
    for (std::int64_t count : hist) {
        y += double(count) * pk;
        pk *= p;
    }
    return {x, y / double(n)};
}

/// Combines replica pairs, in replica order, into means and standard errors.
inline IdentityCheck summarize_identity(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.size() < 2) throw ValidationError("identity check needs at least two replicas");
    double lhs_sum = 0.0, lhs_sq = 0.0, rhs_sum = 0.0, rhs_sq = 0.0;
    for (const auto& [x, y] : pairs) {
        lhs_sum += x;
        lhs_sq += x * x;
        rhs_sum += y;
        rhs_sq += y * y;
    }
    const double m = double(pairs.size());
    IdentityCheck out;
    out.lhs = lhs_sum / m;
    out.rhs = rhs_sum / m;
    const double lhs_var = std::max(0.0, (lhs_sq - m * out.lhs * out.lhs) / (m - 1.0));
    const double rhs_var = std::max(0.0, (rhs_sq - m * out.rhs * out.rhs) / (m - 1.0));
    out.lhs_stderr = std::sqrt(lhs_var / m);
    out.rhs_stderr = std::sqrt(rhs_var / m);
    out.pooled_stderr = std::sqrt(out.lhs_stderr * out.lhs_stderr + out.rhs_stderr * out.rhs_stderr);
    return out;
}

/// Monte Carlo check of E[G-hat_n / n] = E[p_n^{D_n}] for a uniform ball,
/// with both sides drawn from fresh, independent trees.
inline IdentityCheck root_identity_check(const SplitParams& params, std::int64_t n, double c,
                                         std::int64_t replicas, std::uint64_t seed) {
    if (replicas < 2) throw ValidationError("identity check needs at least two replicas");
    const double p = percolation_param(double(n), c);
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(std::size_t(replicas));
    for (std::int64_t r = 0; r < replicas; ++r) pairs.push_back(identity_replica(params, n, p, seed, r));
    return summarize_identity(pairs);
}

} // namespace splitperc
