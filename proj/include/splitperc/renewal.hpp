#pragma once

// Exponential renewal sums g(z) = sum_k b^k P(S_k <= z), with S_k a sum of k
// copies of -ln V_1, estimated without bias by exploring one realisation of
// the infinite b-ary tree with edge weights -ln V.

#include "splitperc/error.hpp"
#include "splitperc/rng.hpp"
#include "splitperc/splitvec.hpp"
#include "splitperc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace splitperc {

inline constexpr std::int64_t kExploreBudget = 100'000'000;

struct ExploreResult {
    std::int64_t count = 0;        // non-root vertices with path weight <= z
    std::int64_t visits = 0;
    bool budget_exceeded = false;
};

namespace detail {

// Absorbs rounding in sums of equal weights, e.g. k * ln b against z.
inline double weight_slack(double z) { return 1e-12 * std::max(1.0, std::abs(z)); }

// Depth-first exploration pruned at z. `visit` sees the path weight of
// every counted vertex. Weights are positive, so pruning loses nothing.
template <class Visit>
ExploreResult explore(const SplitFamily& family, double z, Rng& rng, std::int64_t budget,
                      Visit&& visit) {
    ExploreResult out;
    if (z < 0.0) return out;
    const double limit = z + weight_slack(z);
    std::vector<double> split(static_cast<std::size_t>(branch_factor(family)));
    std::vector<double> stack{0.0};
    while (!stack.empty()) {
        if (++out.visits > budget) {
            out.budget_exceeded = true;
            return out;
        }
        const double s = stack.back();
        stack.pop_back();
        sample_split_vector(family, rng, split);
        for (double v : split) {
            const double w = s - std::log(v);
            if (w <= limit) {
                ++out.count;
                visit(w);
                stack.push_back(w);
            }
        }
    }
    return out;
}

} // namespace detail

/// Number of non-root vertices of one weighted tree whose root-path weight is
/// at most z. Its mean is sum_{k>=1} b^k P(S_k <= z).
inline ExploreResult explore_count(const SplitFamily& family, double z, Rng& rng,
                                   std::int64_t budget = kExploreBudget) {
    validate_family(family);
    return detail::explore(family, z, rng, budget, [](double) {});
}

inline ExploreResult explore_count(const SplitFamily& family, double z, std::uint64_t seed,
                                   std::int64_t budget = kExploreBudget) {
    Rng rng(seed);
    return explore_count(family, z, rng, budget);
}

/// g(z) for the constant vector: sum_{k=1}^{floor(z / ln b)} b^k.
inline double deterministic_renewal(int b, double z) {
    if (z < 0.0) return 0.0;
    const auto levels = std::int64_t(std::floor((z + detail::weight_slack(z)) / std::log(double(b))));
    double total = 0.0, power = 1.0;
    for (std::int64_t k = 1; k <= levels; ++k) total += (power *= b);
    return total;
}

struct RenewalProfile {
    std::vector<double> z;
    std::vector<double> mean;
    std::vector<double> stderr_mean;
    // int_0^{z_max} e^{-z} (g(z) - e^z / mu) dz, trapezoid rule on the grid.
    double integral_trapezoid = 0.0;
    double integral_trapezoid_stderr = 0.0;
    // Same integral evaluated exactly per replica from the vertex weights.
    double integral_exact = 0.0;
    double integral_exact_stderr = 0.0;
    std::int64_t replicas_used = 0;
    std::int64_t failures = 0;
};

/// Per-replica renewal counts on a grid, all read off one exploration at the
/// largest grid point, so counts are nondecreasing along the grid.
struct RenewalReplica {
    std::vector<std::int64_t> counts;
    double integral_trapezoid = 0.0;
    double integral_exact = 0.0;
    bool failed = false;
};

inline void check_grid(const std::vector<double>& grid) {
    if (grid.empty()) throw ValidationError("renewal grid is empty");
    if (grid.front() < 0.0) throw ValidationError("renewal grid must start at or above 0");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw ValidationError("renewal grid must be increasing");
}

inline RenewalReplica renewal_replica(const SplitFamily& family, double mu,
                                      const std::vector<double>& grid, Rng& rng,
                                      std::int64_t budget = kExploreBudget) {
    const double z_max = grid.back();
    std::vector<double> weights;
    const auto res = detail::explore(family, z_max, rng, budget,
                                     [&](double w) { weights.push_back(w); });
    RenewalReplica out;
    if (res.budget_exceeded) {
        out.failed = true;
        return out;
    }
    std::sort(weights.begin(), weights.end());
    out.counts.resize(grid.size());
    const double slack = detail::weight_slack(z_max);
    for (std::size_t i = 0; i < grid.size(); ++i)
        out.counts[i] = std::upper_bound(weights.begin(), weights.end(), grid[i] + slack) - weights.begin();

    // Trapezoid on [0, z_max] with g(0) = 0 prepended when the grid starts above 0.
    auto integrand = [&](double z, double g) { return std::exp(-z) * g - 1.0 / mu; };
    double prev_z = 0.0;
    double prev_f = integrand(0.0, 0.0);
    std::size_t start = 0;
    if (grid.front() == 0.0) {
        prev_f = integrand(0.0, double(out.counts[0]));
        start = 1;
    }
    for (std::size_t i = start; i < grid.size(); ++i) {
        const double f = integrand(grid[i], double(out.counts[i]));
        out.integral_trapezoid += 0.5 * (grid[i] - prev_z) * (prev_f + f);
        prev_z = grid[i];
        prev_f = f;
    }
    // Each vertex with weight w contributes int_w^{z_max} e^{-z} dz.
    double exact = 0.0;
    for (double w : weights) exact += std::exp(-w) - std::exp(-z_max);
    out.integral_exact = exact - z_max / mu;
    return out;
}

/// Monte Carlo estimate of g on a grid, with the second-order integral.
inline RenewalProfile renewal_profile(const SplitFamily& family, const std::vector<double>& grid,
                                      std::int64_t replicas, std::uint64_t seed,
                                      std::int64_t budget = kExploreBudget) {
    validate_family(family);
    check_grid(grid);
    if (replicas < 1) throw ValidationError("renewal profile needs at least one replica");
    const double mu = family_constants(family).mu;
    std::vector<Summary> points(grid.size());
    Summary trap, exact;
    RenewalProfile out;
    for (std::int64_t r = 0; r < replicas; ++r) {
        Rng rng(derive_seed(seed, 0, std::uint64_t(r)));
        const auto rep = renewal_replica(family, mu, grid, rng, budget);
        if (rep.failed) {
            ++out.failures;
            continue;
        }
        for (std::size_t i = 0; i < grid.size(); ++i) points[i].push(double(rep.counts[i]));
        trap.push(rep.integral_trapezoid);
        exact.push(rep.integral_exact);
    }
    out.z = grid;
    for (const auto& p : points) {
        out.mean.push_back(p.mean);
        out.stderr_mean.push_back(p.stderr_mean());
    }
    out.integral_trapezoid = trap.mean;
    out.integral_trapezoid_stderr = trap.stderr_mean();
    out.integral_exact = exact.mean;
    out.integral_exact_stderr = exact.stderr_mean();
    out.replicas_used = trap.count;
    return out;
}

} // namespace splitperc
