#pragma once

#include "splitperc/rng.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace splitperc {

/// Exact Binomial(trials, p) variate.
///
/// Small means use sequential inversion from the mode-free end; larger ones
/// defer to std::binomial_distribution, whose libstdc++ implementation is a
/// rejection sampler with an exact acceptance step.
inline std::int64_t binomial(Rng& rng, std::int64_t trials, double p) {
    if (trials <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return trials;
    const bool flip = p > 0.5;
    const double q = flip ? 1.0 - p : p;
    std::int64_t k = 0;
    if (static_cast<double>(trials) * q < 16.0) {
        // Inversion: walk the pmf from k = 0.
        const double r = q / (1.0 - q);
        double pk = std::exp(static_cast<double>(trials) * std::log1p(-q));
        double u = rng.uniform01();
        while (u >= pk && k < trials) {
            u -= pk;
            pk *= r * static_cast<double>(trials - k) / static_cast<double>(k + 1);
            ++k;
        }
    } else {
        std::binomial_distribution<std::int64_t> dist(trials, q);
        k = dist(rng);
    }
    return flip ? trials - k : k;
}

/// Multinomial(trials, probs) via sequential conditional binomials.
/// Writes one count per coordinate of `probs` into `counts`.
inline void multinomial(Rng& rng, std::int64_t trials, std::span<const double> probs,
                        std::span<std::int64_t> counts) {
    double rest = 1.0;
    std::int64_t left = trials;
    const std::size_t last = probs.size() - 1;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (left == 0) {
            counts[i] = 0;
            continue;
        }
        if (i == last) {
            counts[i] = left;
            break;
        }
        const double cond = rest > 0.0 ? std::min(1.0, probs[i] / rest) : 1.0;
        counts[i] = binomial(rng, left, cond);
        left -= counts[i];
        rest -= probs[i];
    }
}

} // namespace splitperc
