#pragma once

// Summary statistics and goodness-of-fit tools used by the experiment
// harness: Welford summaries, quantiles, Kolmogorov-Smirnov distances, a
// chi-square homogeneity test, and the Hill tail-index estimator.

#include "splitperc/error.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

namespace splitperc {

struct Summary {
    std::int64_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();

    void push(double x) noexcept {
        ++count;
        const double delta = x - mean;
        mean += delta / double(count);
        m2 += delta * (x - mean);
        min = std::min(min, x);
        max = std::max(max, x);
    }

    double variance() const noexcept { return count > 1 ? m2 / double(count - 1) : 0.0; }
    double stddev() const noexcept { return std::sqrt(variance()); }
    double stderr_mean() const noexcept {
        return count > 1 ? std::sqrt(variance() / double(count)) : 0.0;
    }
};

inline Summary summarize(std::span<const double> xs) {
    Summary s;
    for (double x : xs) s.push(x);
    return s;
}

/// Linear-interpolation quantile (type 7) of an already sorted sample.
inline double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw ValidationError("quantile of an empty sample");
    const double pos = q * double(sorted.size() - 1);
    const auto lo = std::size_t(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - double(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double sample_quantile(std::vector<double> xs, double q) {
    std::sort(xs.begin(), xs.end());
    return quantile_sorted(xs, q);
}

inline double sample_median(std::vector<double> xs) { return sample_quantile(std::move(xs), 0.5); }

/// sup_x |F_n(x) - F(x)| against a continuous cdf, evaluated on both sides
/// of every step of the empirical cdf.
inline double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw ValidationError("ks distance needs samples");
    std::sort(samples.begin(), samples.end());
    const double n = double(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max({d, double(i + 1) / n - f, f - double(i) / n});
    }
    return d;
}

/// Kolmogorov limiting survival function Q(lambda) = 2 sum (-1)^{j-1} e^{-2 j^2 lambda^2}.
inline double kolmogorov_survival(double lambda) {
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += (j % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    int dof = 0;
};

/// Two-sample Kolmogorov-Smirnov test with the Stephens small-sample correction.
/// Conservative for discrete data.
inline TestResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw ValidationError("ks test needs two non-empty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = double(a.size()), nb = double(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::abs(double(i) / na - double(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    return {d, kolmogorov_survival((ne + 0.12 + 0.11 / ne) * d), 0};
}

/// Chi-square test that two samples of integer outcomes share one law.
/// Outcomes with few expected counts are pooled into neighbouring bins.
inline TestResult chi_square_homogeneity(std::span<const std::int64_t> a,
                                         std::span<const std::int64_t> b,
                                         double min_expected = 5.0) {
    std::map<std::int64_t, std::pair<double, double>> table;
    for (auto x : a) table[x].first += 1.0;
    for (auto x : b) table[x].second += 1.0;
    const double na = double(a.size()), nb = double(b.size()), total = na + nb;
    std::vector<std::pair<double, double>> bins;
    std::pair<double, double> pending{0.0, 0.0};
    for (const auto& [value, counts] : table) {
        pending.first += counts.first;
        pending.second += counts.second;
        const double pooled = pending.first + pending.second;
        if (pooled * std::min(na, nb) / total >= min_expected) {
            bins.push_back(pending);
            pending = {0.0, 0.0};
        }
    }
    if (pending.first + pending.second > 0.0) {
        if (bins.empty()) bins.push_back(pending);
        else {
            bins.back().first += pending.first;
            bins.back().second += pending.second;
        }
    }
    if (bins.size() < 2) return {0.0, 1.0, 0};
    double stat = 0.0;
    for (const auto& [ca, cb] : bins) {
        const double pooled = ca + cb;
        const double ea = pooled * na / total, eb = pooled * nb / total;
        stat += (ca - ea) * (ca - ea) / ea + (cb - eb) * (cb - eb) / eb;
    }
    const int dof = int(bins.size()) - 1;
    return {stat, boost::math::gamma_q(0.5 * dof, 0.5 * stat), dof};
}

/// Total variation distance between two probability vectors.
inline double total_variation(std::span<const double> p, std::span<const double> q) {
    double d = 0.0;
    const std::size_t n = std::max(p.size(), q.size());
    for (std::size_t i = 0; i < n; ++i) {
        const double a = i < p.size() ? p[i] : 0.0;
        const double b = i < q.size() ? q[i] : 0.0;
        d += std::abs(a - b);
    }
    return 0.5 * d;
}

/// Hill estimate of the tail index alpha from the k largest samples:
/// 1 / mean_{i<k} ln(X_(i) / X_(k)). Needs more than k positive samples.
inline double hill_estimator(std::vector<double> samples, std::size_t k) {
    if (k == 0) throw ValidationError("hill estimator needs k >= 1");
    std::erase_if(samples, [](double x) { return !(x > 0.0) || !std::isfinite(x); });
    if (samples.size() <= k) throw ValidationError("hill estimator needs more than k positive samples");
    std::sort(samples.begin(), samples.end(), std::greater<>());
    const double threshold = samples[k];
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) acc += std::log(samples[i] / threshold);
    if (!(acc > 0.0)) throw ValidationError("hill estimator is degenerate for constant tails");
    return double(k) / acc;
}

} // namespace splitperc
