#pragma once

// Limit laws given by characteristic functions: the continuous
// Luria-Delbrueck variable Z, the affine fluctuation limits for split trees,
// the atomic Levy measure Lambda_rho and the law of L_rho(c) for complete
// b-ary trees. Distribution functions come from Gil-Pelaez inversion, with
// two independent quadrature schemes so each can check the other.

#include "splitperc/error.hpp"
#include "splitperc/splitvec.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <array>
#include <cmath>
#include <complex>
#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

namespace splitperc {

using Complex = std::complex<double>;

enum class BaseKind { luria_delbruck, levy_atomic, generic };

/// Split of an atomic Levy variable at time c into S + b^rho N: S carries the
/// compensated atoms below 1, N = sum_j b^j P_j with independent
/// P_j ~ Poisson(c b^{-j}) collects the atoms at b^{rho + j}, j >= 0.
struct LargeJumps {
    double c = 1.0;
    double rho = 0.0;
    int b = 2;
    std::function<Complex(double)> small_cf;
    double small_decay = 0.0;
    double small_variance = 0.0;
};

/// Law of loc + scale * B, where B has characteristic function `cf`.
struct LimitLaw {
    std::function<Complex(double)> cf;
    double loc = 0.0;
    double scale = 1.0;
    std::string label;
    BaseKind kind = BaseKind::generic;
    // kappa with |cf(t)| <= exp(-kappa t) for t >= 1.
    double decay_rate = 0.0;
    // Set for atomic Levy laws; inversion then runs on the small-jump part.
    std::shared_ptr<const LargeJumps> jumps;
};

// ---------------------------------------------------------------------------
// Luria-Delbrueck
// ---------------------------------------------------------------------------

/// exp(-(pi/2)|t| - i t ln|t|), extended by continuity to 1 at t = 0.
inline Complex ld_cf(double t) {
    if (t == 0.0) return {1.0, 0.0};
    const double a = std::abs(t);
    return std::exp(Complex(-0.5 * std::numbers::pi * a, -t * std::log(a)));
}

inline LimitLaw luria_delbruck() {
    LimitLaw law;
    law.cf = ld_cf;
    law.label = "Z";
    law.kind = BaseKind::luria_delbruck;
    law.decay_rate = 0.5 * std::numbers::pi;
    return law;
}

inline LimitLaw affine(LimitLaw base, double loc, double scale, std::string label) {
    base.loc = loc;
    base.scale = scale;
    base.label = std::move(label);
    return base;
}

/// ln(c/mu) + shift + (mu^2 - sigma^2)(c + mu) / (2 mu^2) - gamma + 1.
inline double fluctuation_inner_shift(double c, double mu, double sigma2, double shift) {
    return std::log(c / mu) + shift + (mu * mu - sigma2) * (c + mu) / (2.0 * mu * mu) -
           kEulerGamma + 1.0;
}

/// Limit of the normalised ball count of the root cluster, non-lattice case:
/// -(c/mu) e^{-c/mu} (Z + ln(c/mu) + varsigma mu + (mu^2 - sigma^2)(c+mu)/(2mu^2) - gamma + 1).
inline LimitLaw theorem2_limit(double c, double mu, double sigma2, double varsigma) {
    if (!(mu > 0.0)) throw ValidationError("mu must be positive");
    if (!(c > 0.0)) throw ValidationError("c must be positive");
    const double scale = -(c / mu) * std::exp(-c / mu);
    const double loc = scale * fluctuation_inner_shift(c, mu, sigma2, varsigma * mu);
    return affine(luria_delbruck(), loc, scale, "ball-count fluctuation limit");
}

/// Vertex-count analogue with prefactor alpha and shift zeta mu / alpha.
inline LimitLaw theorem1_limit(double c, double mu, double sigma2, double alpha, double zeta) {
    if (!(mu > 0.0)) throw ValidationError("mu must be positive");
    if (!(alpha > 0.0)) throw ValidationError("alpha must be positive");
    if (!(c > 0.0)) throw ValidationError("c must be positive");
    const double scale = -(c * alpha / mu) * std::exp(-c / mu);
    const double loc = scale * fluctuation_inner_shift(c, mu, sigma2, zeta * mu / alpha);
    return affine(luria_delbruck(), loc, scale, "vertex-count fluctuation limit");
}

// ---------------------------------------------------------------------------
// Atomic Levy measure
// ---------------------------------------------------------------------------

/// Closed tail b^{floor(rho - log_b x) + 1} / (b - 1).
inline double lambda_bar(double rho, int b, double x) {
    const double lb = std::log(double(b));
    return std::pow(double(b), std::floor(rho - std::log(x) / lb) + 1.0) / double(b - 1);
}

struct LevyAtom {
    int k;
    double position;   // b^{rho - k}
    double mass;       // b^k
};

struct AtomicLevyMeasure {
    double rho = 0.0;
    int b = 2;
    int k_lo = 0;
    int k_hi = 0;
    std::vector<LevyAtom> atoms;   // ordered by k

    /// Mass strictly above x carried by the window.
    double tail(double x) const {
        double total = 0.0;
        for (const auto& a : atoms)
            if (a.position > x) total += a.mass;
        return total;
    }

    /// Window contribution to the integral of min(1, x^2).
    double truncated_moment() const {
        double total = 0.0;
        for (const auto& a : atoms) total += a.mass * std::min(1.0, a.position * a.position);
        return total;
    }
};

namespace detail {

inline void check_levy_inputs(double rho, int b) {
    if (!(rho >= 0.0 && rho < 1.0)) throw ValidationError("rho must lie in [0, 1)");
    if (b < 2) throw ValidationError("b must be at least 2");
}

inline AtomicLevyMeasure make_window(double rho, int b, int k_lo, int k_hi) {
    AtomicLevyMeasure m;
    m.rho = rho;
    m.b = b;
    m.k_lo = k_lo;
    m.k_hi = k_hi;
    const double half = std::sqrt(double(b));
    for (int k = k_lo; k <= k_hi; ++k) {
        const double x = std::pow(double(b), rho - k);
        // Jump of the closed tail across x, read off at the neighbouring gaps.
        const double mass = lambda_bar(rho, b, x / half) - lambda_bar(rho, b, x * half);
        m.atoms.push_back({k, x, mass});
    }
    return m;
}

} // namespace detail

/// Atoms b^k at b^{rho-k}, for k in a window whose omitted part contributes
/// less than tail_tol both to the integral of min(1, x^2) and to the mass
/// above 1.
inline AtomicLevyMeasure lambda_rho(double rho, int b, double tail_tol) {
    detail::check_levy_inputs(rho, b);
    if (!(tail_tol > 0.0)) throw ValidationError("tail tolerance must be positive");
    const double lb = std::log(double(b));
    // sum_{k < k_lo} b^k = b^{k_lo} / (b - 1) and
    // sum_{k > k_hi} b^{2 rho - k} = b^{2 rho - k_hi} / (b - 1).
    const int k_lo = int(std::floor(std::log(tail_tol * (b - 1)) / lb));
    const int k_hi = int(std::ceil(2.0 * rho - std::log(tail_tol * (b - 1)) / lb));
    if (k_hi - k_lo > 400) throw NumericalError("Levy atom window too wide for tail_tol", tail_tol);
    return detail::make_window(rho, b, k_lo, k_hi);
}

/// Laplace exponent sum of b^k (e^{-a x} - 1 + a x 1{x < 1}) over the window.
inline double psi_rho(const AtomicLevyMeasure& m, double a) {
    double total = 0.0;
    for (const auto& atom : m.atoms) {
        const double x = atom.position;
        total += atom.mass * (std::expm1(-a * x) + (x < 1.0 ? a * x : 0.0));
    }
    return total;
}

/// Characteristic exponent sum of b^k (e^{i t x} - 1 - i t x 1{x < 1}).
inline Complex levy_char_exponent(const AtomicLevyMeasure& m, double t) {
    double re = 0.0, im = 0.0;
    for (const auto& atom : m.atoms) {
        const double x = atom.position;
        const double tx = t * x;
        // 1 - cos(tx) = 2 sin^2(tx/2) avoids cancellation for tiny atoms.
        const double half = std::sin(0.5 * tx);
        re -= atom.mass * 2.0 * half * half;
        im += atom.mass * (std::sin(tx) - (x < 1.0 ? tx : 0.0));
    }
    return {re, im};
}

namespace detail {

// Conservative kappa with |cf(t)| <= exp(-kappa t): the ratio
// -ln|cf(t)| / t is log-periodic with period ln b, so one period suffices.
inline double levy_decay_rate(const AtomicLevyMeasure& m, double c) {
    double lowest = std::numeric_limits<double>::infinity();
    const int steps = 400;
    for (int i = 0; i <= steps; ++i) {
        const double t = 4.0 * std::pow(double(m.b), double(i) / steps);
        lowest = std::min(lowest, -c * levy_char_exponent(m, t).real() / t);
    }
    return 0.9 * lowest;
}

} // namespace detail

/// Law of L_rho(c), the spectrally positive Levy process at time c.
inline LimitLaw levy_rho_law(double c, double rho, int b, double tol) {
    detail::check_levy_inputs(rho, b);
    if (!(c > 0.0)) throw ValidationError("c must be positive");
    if (!(tol > 0.0)) throw ValidationError("tol must be positive");
    const double lb = std::log(double(b));
    const double tail_tol = tol * 1e-3;
    // First pass fixes the decay rate; the small-atom cutoff then has to keep
    // t^2 b^{2 rho - k_hi} / (2 (b - 1)) small up to the inversion horizon.
    auto coarse = lambda_rho(rho, b, tail_tol);
    const double kappa = detail::levy_decay_rate(coarse, c);
    if (!(kappa > 0.0)) throw NumericalError("Levy characteristic function does not decay", kappa);
    double horizon = 1.0;
    while (std::exp(-kappa * horizon) / (std::min(kappa, 1.0) * horizon) >= tail_tol) horizon *= 1.25;
    const int k_hi = int(std::ceil(
        2.0 * rho + std::log(horizon * horizon * 4.0 * c / (2.0 * (b - 1) * tail_tol)) / lb));
    if (k_hi - coarse.k_lo > 400)
        throw NumericalError("Levy atom window unable to meet tolerance", tol);
    auto measure = std::make_shared<const AtomicLevyMeasure>(
        detail::make_window(rho, b, coarse.k_lo, std::max(k_hi, coarse.k_hi)));

    LimitLaw law;
    law.cf = [measure, c](double t) {
        if (t == 0.0) return Complex(1.0, 0.0);
        return std::exp(c * levy_char_exponent(*measure, t));
    };
    law.label = "L_rho(c)";
    law.kind = BaseKind::levy_atomic;
    law.decay_rate = kappa;

    auto small = std::make_shared<AtomicLevyMeasure>(*measure);
    std::erase_if(small->atoms, [](const LevyAtom& a) { return a.position >= 1.0; });
    small->k_lo = small->atoms.front().k;
    auto split = std::make_shared<LargeJumps>();
    split->c = c;
    split->rho = rho;
    split->b = b;
    split->small_cf = [small, c](double t) {
        if (t == 0.0) return Complex(1.0, 0.0);
        return std::exp(c * levy_char_exponent(*small, t));
    };
    split->small_decay = detail::levy_decay_rate(*small, c);
    split->small_variance = c * std::pow(double(b), 2.0 * rho) / double(b - 1);
    law.jumps = std::move(split);
    return law;
}

/// Limit of the normalised root cluster of the complete b-ary tree:
/// -e^{-c} (L_rho(c) + c rho - c / (b - 1)).
inline LimitLaw theorem4_limit(double c, double rho, int b, double tol) {
    LimitLaw base = levy_rho_law(c, rho, b, tol);
    const double scale = -std::exp(-c);
    const double loc = scale * (c * rho - c / double(b - 1));
    return affine(std::move(base), loc, scale, "regular-tree fluctuation limit");
}

/// Same centring with L_rho run for time c b^{-rho}, i.e. Levy measure
/// b^{-rho} Lambda_rho: cuts at depth k arrive at rate c b^k / h and remove
/// h b^{-k} in normalised units. Unlike theorem4_limit this is continuous as
/// rho -> 1, matching the periodicity of the statistic in log_b h.
inline LimitLaw theorem4_limit_rescaled(double c, double rho, int b, double tol) {
    detail::check_levy_inputs(rho, b);
    LimitLaw base = levy_rho_law(c * std::pow(double(b), -rho), rho, b, tol);
    const double scale = -std::exp(-c);
    const double loc = scale * (c * rho - c / double(b - 1));
    return affine(std::move(base), loc, scale, "regular-tree fluctuation limit, rescaled measure");
}

// ---------------------------------------------------------------------------
// Inversion
// ---------------------------------------------------------------------------

enum class InversionScheme { panel, tail_series };

struct CdfResult {
    double value = 0.0;
    double error_estimate = 0.0;
};

namespace detail {

// Gil-Pelaez integrand Im(e^{-ity} cf(t)) / t for the base variable.
struct GilPelaez {
    const LimitLaw* law;
    double y;

    double operator()(double t) const {
        const Complex v = std::exp(Complex(0.0, -t * y)) * law->cf(t);
        return v.imag() / t;
    }

    // Local angular frequency of the integrand, for panel sizing.
    double frequency(double t) const {
        const double h = 1e-4 * t;
        const Complex ratio = law->cf(t + h) / law->cf(t - h);
        const double phase_rate = std::arg(ratio) / (2.0 * h);
        return std::abs(phase_rate - y);
    }
};

// Smallest T with e^{-kappa T} / (min(kappa, 1) T) < bound.
inline double truncation_horizon(double kappa, double bound) {
    double t = 1.0;
    while (std::exp(-kappa * t) / (std::min(kappa, 1.0) * t) >= bound) t *= 1.05;
    return t;
}

// Integral over (0, t0] of -e^{-pi t/2} sin(t L) / t with L = ln t + y, by
// termwise integration of the double series in t and L:
// int_0^{t0} t^k L^r dt = t0^{k+1} L0^r / (k+1) - r/(k+1) int_0^{t0} t^k L^{r-1} dt.
inline double ld_small_t_integral(double y, double t0) {
    constexpr int kMaxExp = 10;   // powers of e^{-pi t/2}
    constexpr int kMaxSin = 6;    // powers of the sine series
    const double l0 = std::log(t0) + y;
    const double half_pi = 0.5 * std::numbers::pi;
    double total = 0.0;
    double exp_coef = 1.0;   // (-pi/2)^j / j!
    for (int j = 0; j <= kMaxExp; ++j) {
        double sin_coef = 1.0;   // (-1)^m / (2m+1)!
        for (int m = 0; m <= kMaxSin; ++m) {
            const int k = j + 2 * m;
            const int r = 2 * m + 1;
            const double head = std::pow(t0, k + 1) / (k + 1);
            double moment = head;   // r = 0
            double l_pow = 1.0;
            for (int q = 1; q <= r; ++q) {
                l_pow *= l0;
                moment = head * l_pow - double(q) / (k + 1) * moment;
            }
            total -= exp_coef * sin_coef * moment;
            sin_coef /= -double((2 * m + 2) * (2 * m + 3));
        }
        exp_coef *= -half_pi / double(j + 1);
    }
    return total;
}

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
template <int N>
struct GaussLegendre {
    std::array<double, N> x{};
    std::array<double, N> w{};

    GaussLegendre() {
        for (int i = 0; i < N; ++i) {
            double z = std::cos(std::numbers::pi * (i + 0.75) / (N + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = z;
                for (int k = 2; k <= N; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N * (z * p1 - p0) / (z * z - 1.0);
                const double dz = p1 / dp;
                z -= dz;
                if (std::abs(dz) < 1e-16) break;
            }
            x[std::size_t(i)] = z;
            w[std::size_t(i)] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
    }

    template <class F>
    double integrate(F&& f, double a, double b) const {
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        double s = 0.0;
        for (int i = 0; i < N; ++i) s += w[std::size_t(i)] * f(mid + half * x[std::size_t(i)]);
        return s * half;
    }
};

inline const GaussLegendre<20>& gauss_legendre20() {
    static const GaussLegendre<20> rule;
    return rule;
}

// Gauss-Kronrod 15 on [a, b], bisected until |K - G| < abs_tol or the estimate
// falls to the rounding floor noise * (b - a). Adds the error estimate to `err`.
template <class F>
double gk_absolute(const F& f, double a, double b, double abs_tol, double noise, int depth,
                   double& err) {
    using boost::math::quadrature::gauss_kronrod;
    double e = 0.0;
    const double v = gauss_kronrod<double, 15>::integrate(f, a, b, 0, 0.0, &e);
    if (e <= abs_tol || e <= noise * (b - a) || depth == 0) {
        err += e;
        return v;
    }
    const double mid = 0.5 * (a + b);
    return gk_absolute(f, a, mid, 0.5 * abs_tol, noise, depth - 1, err) +
           gk_absolute(f, mid, b, 0.5 * abs_tol, noise, depth - 1, err);
}

// Adaptive Gauss-Kronrod on oscillation-sized panels, with the singular
// start handled analytically (Z) or by geometric panels (other laws).
inline CdfResult invert_panel(const LimitLaw& law, double y, double tol) {
    const GilPelaez g{&law, y};
    double integral = 0.0, err = 0.0;

    double t0;
    if (law.kind == BaseKind::luria_delbruck) {
        t0 = 1e-3;
        while (t0 * (std::abs(std::log(t0)) + std::abs(y)) > 0.05) t0 *= 0.5;
        integral += ld_small_t_integral(y, t0);
    } else {
        t0 = std::min(0.5, 1.0 / (1.0 + std::abs(y)));
        double hi = t0;
        for (int j = 0; j < 200; ++j) {
            const double lo = 0.5 * hi;
            integral += gk_absolute(g, lo, hi, tol * 1e-4, 0.0, 12, err);
            hi = lo;
            // What is left is bounded by hi * |g(hi)| up to a log factor.
            if (2.0 * hi * (std::abs(g(hi)) + 1.0) < tol * 1e-3) break;
        }
    }

    const double horizon = truncation_horizon(law.decay_rate, tol / 10.0);
    double a = t0;
    while (a < horizon) {
        const double freq = g.frequency(a);
        // Capping at a keeps the 1/t factor within a factor 2 per panel.
        const double width = std::min({1.0, a, std::numbers::pi / (freq + 1.0), horizon - a});
        const double b = a + width;
        // Rounding in the phase t (y + ...) grows with the frequency.
        const double noise = 1e-13 * (1.0 / a + freq + std::abs(y));
        integral += gk_absolute(g, a, b, tol * 1e-2 * width / horizon, noise, 12, err);
        a = b;
    }
    err += tol / 10.0;   // truncation
    return {0.5 - integral / std::numbers::pi, err / std::numbers::pi};
}

// Fixed Gauss-Legendre panels summed as a series until the modulus envelope
// bounds the remainder; (0, t1] is mapped to a half line by t = t1 e^{-u}.
inline CdfResult invert_tail_series(const LimitLaw& law, double y, double tol) {
    const auto& rule = gauss_legendre20();
    const GilPelaez g{&law, y};
    const double t1 = std::min(0.5, 1.0 / (1.0 + std::abs(y)));
    double integral = 0.0;

    auto mapped = [&](double u) {
        const double t = t1 * std::exp(-u);
        return g(t) * t;
    };
    for (double u = 0.0;; u += 1.0) {
        integral += rule.integrate(mapped, u, u + 1.0);
        const double t = t1 * std::exp(-(u + 1.0));
        if (t * (u + 1.0 + std::abs(std::log(t1)) + std::abs(y) + 4.0) < tol * 1e-4) break;
        if (u > 80.0) break;
    }

    const double kappa = law.decay_rate;
    const double t_cap = 50.0 * truncation_horizon(kappa, tol / 10.0);
    double a = t1;
    while (true) {
        const double width = 0.5 * std::numbers::pi / (g.frequency(a) + 1.0);
        const double b = a + std::min(width, 0.5);
        integral += rule.integrate(g, a, b);
        a = b;
        const double envelope = std::abs(law.cf(a)) / (std::min(kappa, 1.0) * a);
        if (envelope < tol * 1e-2) break;
        if (a > t_cap) throw NumericalError("tail series did not converge", envelope);
    }
    return {0.5 - integral / std::numbers::pi, tol * 1e-2};
}

// Far tails of Z from E e^{-aZ} = a^a. Left: the Chernoff bound
// exp(-e^{-y-1}). Right: P(Z > y) = (1/pi) int_0^inf e^{-t ln t - y t} sin(pi t) / t dt,
// integrated in u = y t, which leaves no oscillation for y >= 1.
inline double ld_left_bound(double y) { return std::exp(-std::exp(-y - 1.0)); }

inline CdfResult ld_upper_tail(double y, double tol) {
    using boost::math::quadrature::gauss_kronrod;
    const double eps = tol * 1e-3;
    auto f = [y](double u) {
        if (u == 0.0) return std::numbers::pi;
        const double t = u / y;
        return std::exp(-u - t * std::log(t)) * std::sin(std::numbers::pi * t) / t;
    };
    // For u >= y the integrand is below pi e^{-u}; below that, below pi e^{1/e - u}.
    const double upper = std::log(std::numbers::pi * 2.0 / eps);
    double err = 0.0;
    const double v = gauss_kronrod<double, 31>::integrate(f, 0.0, upper, 15, eps, &err);
    const double tail = v / (std::numbers::pi * y);
    return {1.0 - tail, (err + 2.0 * eps) / (std::numbers::pi * y)};
}

// pmf of N = sum_j b^j Poisson(c b^{-j}) on 0..n_max.
inline std::vector<double> large_jump_pmf(const LargeJumps& J, std::int64_t n_max) {
    if (n_max > 10'000'000) throw NumericalError("cdf argument too far in the tail", double(n_max));
    std::vector<double> pmf(std::size_t(n_max + 1), 0.0);
    pmf[0] = 1.0;
    std::vector<double> next(pmf.size());
    std::vector<double> pois;
    std::int64_t step = 1;
    double lambda = J.c;
    for (; step <= n_max; step *= J.b, lambda /= J.b) {
        pois.assign(1, std::exp(-lambda));
        for (std::int64_t m = 1; m * step <= n_max; ++m) {
            const double q = pois.back() * lambda / double(m);
            if (double(m) > lambda && q < 1e-300) break;
            pois.push_back(q);
        }
        std::fill(next.begin(), next.end(), 0.0);
        for (std::int64_t n = 0; n <= n_max; ++n) {
            double acc = 0.0;
            for (std::size_t m = 0; m < pois.size() && std::int64_t(m) * step <= n; ++m)
                acc += pois[m] * pmf[std::size_t(n - std::int64_t(m) * step)];
            next[std::size_t(n)] = acc;
        }
        pmf.swap(next);
        if (step > n_max / J.b) {
            step *= J.b;
            lambda /= J.b;
            break;
        }
    }
    // Types with b^j > n_max can only contribute zero counts.
    const double rest = std::exp(-lambda * double(J.b) / double(J.b - 1));
    for (double& p : pmf) p *= rest;
    return pmf;
}

// F(y) = sum_N P(N) F_S(y - b^rho N); F_S is replaced by 0 or 1 where the
// Bernstein bounds on S put it within tol * 1e-3 of those values.
inline CdfResult invert_large_jumps(const LimitLaw& law, double y, double tol,
                                    InversionScheme scheme) {
    const LargeJumps& J = *law.jumps;
    const double eps = tol * 1e-3;
    const double log_eps = -std::log(eps);
    const double v = J.small_variance;
    const double m_left = std::sqrt(2.0 * v * log_eps);
    const double m_right = log_eps / 3.0 + std::sqrt(log_eps * log_eps / 9.0 + 2.0 * v * log_eps);
    const double unit = std::pow(double(J.b), J.rho);
    if (y + m_left < 0.0) return {0.0, eps};
    const auto n_hi = std::int64_t(std::floor((y + m_left) / unit));
    const auto n_lo = std::int64_t(std::floor((y - m_right) / unit));   // may be negative
    const auto pmf = large_jump_pmf(J, n_hi);

    LimitLaw small;
    small.cf = J.small_cf;
    small.decay_rate = J.small_decay;
    small.label = "small jumps";
    CdfResult out{0.0, 2.0 * eps};
    for (std::int64_t n = 0; n <= n_hi; ++n) {
        const double p = pmf[std::size_t(n)];
        if (n <= n_lo) {
            out.value += p;
            continue;
        }
        const double z = y - unit * double(n);
        const CdfResult f = scheme == InversionScheme::panel ? invert_panel(small, z, 0.5 * tol)
                                                             : invert_tail_series(small, z, 0.5 * tol);
        out.value += p * f.value;
        out.error_estimate += p * f.error_estimate;
    }
    return out;
}

} // namespace detail

/// Beyond this base argument the Z right tail comes from its Laplace transform;
/// the cost of both oscillatory schemes grows linearly with the argument.
inline constexpr double kZFarTail = 1e3;

/// F(x) for the law, by Gil-Pelaez inversion of the base characteristic function.
inline CdfResult cdf_detail(const LimitLaw& law, double x, double tol,
                            InversionScheme scheme = InversionScheme::panel) {
    if (!(tol > 0.0 && tol <= 1e-3)) throw ValidationError("cdf tolerance must lie in (0, 1e-3]");
    if (law.scale == 0.0) return {x >= law.loc ? 1.0 : 0.0, 0.0};
    const double y = (x - law.loc) / law.scale;
    CdfResult base;
    if (law.kind == BaseKind::luria_delbruck && detail::ld_left_bound(y) <= tol * 1e-3)
        base = {0.0, detail::ld_left_bound(y)};
    else if (law.kind == BaseKind::luria_delbruck && y >= kZFarTail)
        base = detail::ld_upper_tail(y, tol);
    else
        base = law.jumps ? detail::invert_large_jumps(law, y, tol, scheme)
               : scheme == InversionScheme::panel ? detail::invert_panel(law, y, tol)
                                                  : detail::invert_tail_series(law, y, tol);
    if (base.error_estimate > tol)
        throw NumericalError("cdf inversion did not reach the requested tolerance",
                             base.error_estimate);
    // Both bases are atomless, so reflection needs no left limit.
    if (law.scale < 0.0) base.value = 1.0 - base.value;
    base.value = std::clamp(base.value, 0.0, 1.0);
    return base;
}

inline double cdf(const LimitLaw& law, double x, double tol = 1e-6,
                  InversionScheme scheme = InversionScheme::panel) {
    return cdf_detail(law, x, tol, scheme).value;
}

/// Quantile by bisection on the cdf, to 10 * tol in x.
inline double quantile(const LimitLaw& law, double q, double tol = 1e-6) {
    if (!(q > 0.0 && q < 1.0)) throw ValidationError("quantile level must lie in (0, 1)");
    if (law.scale == 0.0) return law.loc;
    const double spread = std::abs(law.scale);
    double lo = law.loc - spread, hi = law.loc + spread;
    while (cdf(law, lo, tol) > q) lo -= 2.0 * (hi - lo);
    while (cdf(law, hi, tol) < q) hi += 2.0 * (hi - lo);
    while (hi - lo > 10.0 * tol) {
        const double mid = 0.5 * (lo + hi);
        (cdf(law, mid, tol) < q ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline double median(const LimitLaw& law, double tol = 1e-6) { return quantile(law, 0.5, tol); }

/// Writes "x,F(x)" rows for plotting.
inline void export_cdf_csv(const LimitLaw& law, const std::vector<double>& xs, std::ostream& os,
                           double tol = 1e-6) {
    os << "x,F\n";
    os.precision(12);
    for (double x : xs) os << x << ',' << cdf(law, x, tol) << '\n';
}

} // namespace splitperc
