#pragma once

// Percolation on the complete b-ary tree of height h.

#include "splitperc/error.hpp"
#include "splitperc/rng.hpp"
#include "splitperc/sampling.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace splitperc {

/// n_h = (b^{h+1} - 1) / (b - 1), the vertex count of the complete tree.
inline std::int64_t regular_size(int b, int h) {
    if (b < 2) throw ValidationError("regular tree needs b >= 2");
    if (h < 0) throw ValidationError("regular tree needs h >= 0");
    std::int64_t total = 1, level = 1;
    for (int k = 1; k <= h; ++k) {
        if (level > std::numeric_limits<std::int64_t>::max() / b)
            throw BudgetExceeded("regular tree size overflows 64-bit integers");
        level *= b;
        if (total > std::numeric_limits<std::int64_t>::max() - level)
            throw BudgetExceeded("regular tree size overflows 64-bit integers");
        total += level;
    }
    return total;
}

/// p_h = exp(-c / h).
inline double regular_percolation_param(int h, double c) {
    if (h < 1) throw ValidationError("regular percolation parameter needs h >= 1");
    if (!(c >= 0.0)) throw ValidationError("c must be non-negative");
    return std::exp(-c / double(h));
}

/// Vertices of the complete tree a full traversal may allocate per-vertex state for.
inline constexpr std::int64_t kRegularFullBudget = std::int64_t(1) << 27;

struct RegularOutcome {
    std::int64_t root_cluster = 0;            // G^reg
    std::optional<std::int64_t> second;       // full traversal only
    std::optional<std::int64_t> cluster_count;
    std::int64_t visited = 0;
};

enum class RegularMode {
    root_only,   // walk the root cluster only, O(h) memory
    full,        // visit every vertex, also yields the second-largest cluster
};

namespace detail {

inline void check_probability(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("percolation parameter must lie in [0, 1]");
}

} // namespace detail

/// Percolates the implicit complete tree (children of index i are
/// b*i + 1, ..., b*i + b) without materialising it.
inline RegularOutcome simulate_regular(int b, int h, double p, Rng& rng,
                                       RegularMode mode = RegularMode::root_only) {
    const std::int64_t n_h = regular_size(b, h);
    detail::check_probability(p);
    RegularOutcome out;
    if (mode == RegularMode::root_only) {
        // Depth-first over retained edges; the stack holds pending depths and
        // never exceeds b * h entries.
        std::vector<std::int32_t> stack{0};
        stack.reserve(std::size_t(b) * std::size_t(h + 1));
        while (!stack.empty()) {
            const std::int32_t d = stack.back();
            stack.pop_back();
            ++out.root_cluster;
            if (d == h) continue;
            for (int i = 0; i < b; ++i)
                if (rng.bernoulli(p)) stack.push_back(d + 1);
        }
        out.visited = out.root_cluster;
        return out;
    }

    if (n_h > kRegularFullBudget) throw BudgetExceeded("complete tree exceeds the traversal budget");
    std::vector<std::int32_t> cluster(static_cast<std::size_t>(n_h));
    std::vector<std::int64_t> sizes{1};
    cluster[0] = 0;
    for (std::int64_t i = 1; i < n_h; ++i) {
        const std::int64_t par = (i - 1) / b;
        std::int32_t id;
        if (rng.bernoulli(p)) {
            id = cluster[std::size_t(par)];
        } else {
            id = std::int32_t(sizes.size());
            sizes.push_back(0);
        }
        cluster[std::size_t(i)] = id;
        ++sizes[std::size_t(id)];
    }
    out.root_cluster = sizes[0];
    out.cluster_count = std::int64_t(sizes.size());
    std::int64_t first = 0, second = 0;
    for (std::int64_t s : sizes) {
        if (s > first) {
            second = first;
            first = s;
        } else if (s > second) {
            second = s;
        }
    }
    out.second = sizes.size() > 1 ? second : 0;
    out.visited = n_h;
    return out;
}

inline RegularOutcome simulate_regular(int b, int h, double p, std::uint64_t seed,
                                       RegularMode mode = RegularMode::root_only) {
    Rng rng(seed);
    return simulate_regular(b, h, p, rng, mode);
}

/// Root-cluster size from generation counts: Z_0 = 1, Z_{k+1} ~ Bin(b Z_k, p),
/// G = sum_k Z_k. Exact in law and O(h) per draw.
inline std::int64_t sample_regular_root_cluster(int b, int h, double p, Rng& rng) {
    regular_size(b, h);
    detail::check_probability(p);
    std::int64_t generation = 1, total = 1;
    for (int k = 1; k <= h && generation > 0; ++k) {
        generation = binomial(rng, std::int64_t(b) * generation, p);
        total += generation;
    }
    return total;
}

/// Largest tree the exact root-cluster law is computed for.
inline constexpr std::int64_t kExactPmfLimit = 10'000;

/// Exact law of the root-cluster size on {1, ..., n_h}; entry k-1 is P(G = k).
///
/// Uses G_0 = 1 and G_h = 1 + sum_{i=1}^{b} B_i G_{h-1}^{(i)} with B_i ~ Bern(p).
inline std::vector<double> exact_root_pmf(int b, int h, double p) {
    const std::int64_t n_h = regular_size(b, h);
    if (n_h > kExactPmfLimit) throw BudgetExceeded("exact root-cluster law limited to n_h <= 10^4");
    detail::check_probability(p);

    // Index = cluster size; starts as the point mass at 1.
    std::vector<double> law{0.0, 1.0};
    std::vector<double> branch, acc, next;
    std::vector<double> comp;
    for (int level = 1; level <= h; ++level) {
        // One child edge: size 0 if cut, else a copy of the previous law.
        branch.assign(law.size(), 0.0);
        for (std::size_t k = 0; k < law.size(); ++k) branch[k] = p * law[k];
        branch[0] += 1.0 - p;

        acc.assign(1, 1.0);
        for (int child = 0; child < b; ++child) {
            next.assign(acc.size() + branch.size() - 1, 0.0);
            comp.assign(next.size(), 0.0);
            for (std::size_t i = 0; i < acc.size(); ++i) {
                if (acc[i] == 0.0) continue;
                for (std::size_t j = 0; j < branch.size(); ++j) {
                    // Kahan-compensated accumulation.
                    const double y = acc[i] * branch[j] - comp[i + j];
                    const double t = next[i + j] + y;
                    comp[i + j] = (t - next[i + j]) - y;
                    next[i + j] = t;
                }
            }
            acc.swap(next);
        }
        law.assign(acc.size() + 1, 0.0);
        for (std::size_t k = 0; k < acc.size(); ++k) law[k + 1] = acc[k];
    }
    law.resize(std::size_t(n_h) + 1, 0.0);
    return std::vector<double>(law.begin() + 1, law.end());
}

/// (G/n_h - e^{-c}) h - c e^{-c} log_b h.
inline double theorem4_statistic(std::int64_t root_cluster, int b, int h, double c) {
    if (h < 2) throw ValidationError("normalised regular statistic needs h >= 2");
    const double n_h = double(regular_size(b, h));
    const double e = std::exp(-c);
    return (double(root_cluster) / n_h - e) * double(h) - c * e * std::log(double(h)) / std::log(double(b));
}

/// Fractional part of log_b h, the limit parameter rho.
inline double regular_rho(int b, int h) {
    const double l = std::log(double(h)) / std::log(double(b));
    double r = l - std::floor(l);
    // Exact powers of b can land a hair below an integer.
    if (r > 1.0 - 1e-12) r = 0.0;
    return r;
}

} // namespace splitperc
