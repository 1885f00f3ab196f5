#pragma once

// Split-vector families, split-tree parameters, and the analytic constants
// that govern typical depths: mu, sigma^2, the Mellin transform E[V_1^t]
// and the lattice span of ln V_1.

#include "splitperc/error.hpp"
#include "splitperc/rng.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

namespace splitperc {

inline constexpr double kEulerGamma = std::numbers::egamma;

/// (U, 1 - U) with U uniform on [0, 1].
struct BinarySearch {};
/// Uniform spacings of b - 1 uniform points; each coordinate is Beta(1, b - 1).
struct Spacings {
    int b = 2;
};
/// The constant vector (1/b, ..., 1/b). Lattice, span ln b.
struct Deterministic {
    int b = 2;
};
/// Symmetric Dirichlet(a, ..., a) on b coordinates.
struct Dirichlet {
    int b = 2;
    double a = 1.0;
};

using SplitFamily = std::variant<BinarySearch, Spacings, Deterministic, Dirichlet>;

inline int branch_factor(const SplitFamily& family) {
    return std::visit(
        [](const auto& f) -> int {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, BinarySearch>) return 2;
            else return f.b;
        },
        family);
}

inline std::string family_name(const SplitFamily& family) {
    return std::visit(
        [](const auto& f) -> std::string {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, BinarySearch>) return "bst";
            else if constexpr (std::is_same_v<F, Spacings>) return "spacings:" + std::to_string(f.b);
            else if constexpr (std::is_same_v<F, Deterministic>)
                return "deterministic:" + std::to_string(f.b);
            else {
                char buf[64];
                auto res = std::to_chars(buf, buf + sizeof buf, f.a);
                return "dirichlet:" + std::to_string(f.b) + ":" + std::string(buf, res.ptr);
            }
        },
        family);
}

inline void validate_family(const SplitFamily& family) {
    const int b = branch_factor(family);
    if (b < 2 || b > 64) throw ValidationError("branch factor must lie in [2, 64]");
    if (const auto* d = std::get_if<Dirichlet>(&family)) {
        if (!(d->a > 0.0) || !std::isfinite(d->a))
            throw ValidationError("dirichlet concentration must be positive");
    }
}

namespace detail {

inline int parse_int_field(std::string_view text, std::string_view what) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ValidationError("bad " + std::string(what) + " '" + std::string(text) + "'");
    return value;
}

inline double parse_double_field(std::string_view text, std::string_view what) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ValidationError("bad " + std::string(what) + " '" + std::string(text) + "'");
    return value;
}

} // namespace detail

/// Parses a preset name: "bst", "spacings:b", "deterministic:b", "dirichlet:b:a".
inline SplitFamily parse_family(std::string_view name) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = name.find(':', start);
        parts.push_back(name.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    SplitFamily family;
    if (parts[0] == "bst" && parts.size() == 1) {
        family = BinarySearch{};
    } else if (parts[0] == "spacings" && parts.size() == 2) {
        family = Spacings{detail::parse_int_field(parts[1], "branch factor")};
    } else if (parts[0] == "deterministic" && parts.size() == 2) {
        family = Deterministic{detail::parse_int_field(parts[1], "branch factor")};
    } else if (parts[0] == "dirichlet" && parts.size() == 3) {
        family = Dirichlet{detail::parse_int_field(parts[1], "branch factor"),
                           detail::parse_double_field(parts[2], "concentration")};
    } else {
        throw ValidationError("unknown split family '" + std::string(name) + "'");
    }
    validate_family(family);
    return family;
}

/// Lattice span of ln V_1. Declared per family, never inferred from samples.
inline double lattice_span(const SplitFamily& family) {
    if (const auto* d = std::get_if<Deterministic>(&family)) return std::log(double(d->b));
    return 0.0;
}

inline bool is_lattice(const SplitFamily& family) { return lattice_span(family) > 0.0; }

/// Parameters (a, b) of the Beta law of V_1, when V_1 is non-degenerate.
struct BetaMarginal {
    double alpha;
    double beta;
};

inline std::optional<BetaMarginal> beta_marginal(const SplitFamily& family) {
    return std::visit(
        [](const auto& f) -> std::optional<BetaMarginal> {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, BinarySearch>) return BetaMarginal{1.0, 1.0};
            else if constexpr (std::is_same_v<F, Spacings>) return BetaMarginal{1.0, f.b - 1.0};
            else if constexpr (std::is_same_v<F, Dirichlet>)
                return BetaMarginal{f.a, f.a * (f.b - 1)};
            else return std::nullopt;
        },
        family);
}

// ---------------------------------------------------------------------------
// Split-tree parameters
// ---------------------------------------------------------------------------

struct SplitParams {
    int b = 2;
    int s = 1;
    int s0 = 1;
    int s1 = 0;
    SplitFamily family = BinarySearch{};
};

/// Checks 0 < s, 0 <= s0 <= s and 0 <= b*s1 <= s + 1 - s0.
inline void validate_params(int b, int s, int s0, int s1) {
    if (b < 2) throw ValidationError("branch factor b must be at least 2");
    if (!(s > 0)) throw ValidationError("capacity violates 0 < s");
    if (!(0 <= s0)) throw ValidationError("s0 violates 0 <= s0");
    if (!(s0 <= s)) throw ValidationError("s0 violates s0 <= s");
    if (!(0 <= s1)) throw ValidationError("s1 violates 0 <= b*s1");
    if (!(static_cast<long long>(b) * s1 <= static_cast<long long>(s) + 1 - s0))
        throw ValidationError("s1 violates b*s1 <= s + 1 - s0");
}

inline void validate_params(const SplitParams& params) {
    validate_family(params.family);
    if (branch_factor(params.family) != params.b)
        throw ValidationError("branch factor does not match the split family");
    validate_params(params.b, params.s, params.s0, params.s1);
}

inline SplitParams make_params(const SplitFamily& family, int s, int s0, int s1) {
    SplitParams p{branch_factor(family), s, s0, s1, family};
    validate_params(p);
    return p;
}

/// Random binary search tree: b = 2, s = s0 = 1, s1 = 0.
inline SplitParams bst_params() { return make_params(BinarySearch{}, 1, 1, 0); }

/// Trie-style parameters: s = 1, s0 = 0, s1 = 0.
inline SplitParams trie_params(const SplitFamily& family) { return make_params(family, 1, 0, 0); }

/// Conventional parameters for a preset: bst gets its search-tree values,
/// every other family the trie values.
inline SplitParams default_params(const SplitFamily& family) {
    if (std::holds_alternative<BinarySearch>(family)) return bst_params();
    return trie_params(family);
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Split vector of a binary search tree for a given uniform draw.
inline std::array<double, 2> bst_split(double u) noexcept { return {u, 1.0 - u}; }

/// Fills `out` (length b) with one split vector.
inline void sample_split_vector(const SplitFamily& family, Rng& rng, std::span<double> out) {
    std::visit(
        [&](const auto& f) {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, BinarySearch>) {
                const auto v = bst_split(rng.uniform01());
                out[0] = v[0];
                out[1] = v[1];
            } else if constexpr (std::is_same_v<F, Deterministic>) {
                for (auto& x : out) x = 1.0 / f.b;
            } else if constexpr (std::is_same_v<F, Spacings>) {
                double total = 0.0;
                for (auto& x : out) total += (x = -std::log(rng.uniform_open0()));
                for (auto& x : out) x /= total;
            } else {
                std::gamma_distribution<double> gamma(f.a, 1.0);
                double total = 0.0;
                for (auto& x : out) total += (x = gamma(rng));
                if (total > 0.0) {
                    for (auto& x : out) x /= total;
                } else {
                    // All gammas underflowed: mass goes to a uniformly chosen coordinate.
                    for (auto& x : out) x = 0.0;
                    out[rng.below(out.size())] = 1.0;
                }
            }
        },
        family);
}

inline std::vector<double> sample_split_vector(const SplitFamily& family, Rng& rng) {
    std::vector<double> v(static_cast<std::size_t>(branch_factor(family)));
    sample_split_vector(family, rng, v);
    return v;
}

// ---------------------------------------------------------------------------
// Constants
// ---------------------------------------------------------------------------

struct FamilyConstants {
    double mu = 0.0;
    double sigma2 = 0.0;
    double span_d = 0.0;
    std::optional<double> alpha;
    std::optional<double> varsigma;
    std::optional<double> zeta;
};

enum class ConstantsMethod { closed_form, quadrature, monte_carlo };

namespace detail {

/// E[g(V)] for V ~ Beta(a, b), adaptive tanh-sinh on [0, 1].
template <class F>
double beta_expectation(const BetaMarginal& m, F&& g) {
    const double log_norm =
        std::lgamma(m.alpha + m.beta) - std::lgamma(m.alpha) - std::lgamma(m.beta);
    // tanh_sinh passes xc = -v near 0 and xc = 1 - v near 1.
    auto integrand = [&](double x, double xc) {
        const double v = xc < 0.0 ? -xc : x;
        const double complement = xc < 0.0 ? 1.0 - x : xc;
        if (v <= 0.0 || complement <= 0.0) return 0.0;
        const double logd =
            log_norm + (m.alpha - 1.0) * std::log(v) + (m.beta - 1.0) * std::log(complement);
        return g(v) * std::exp(logd);
    };
    boost::math::quadrature::tanh_sinh<double> integrator;
    double error = 0.0;
    const double value = integrator.integrate(integrand, 0.0, 1.0, 1e-12, &error);
    if (error > 1e-9)
        throw NumericalError("split-vector quadrature missed its 1e-9 tolerance", error);
    return value;
}

inline double neg_v_log_v(double v) { return v > 0.0 ? -v * std::log(v) : 0.0; }

inline double v_log2_v(double v) {
    if (v <= 0.0) return 0.0;
    const double l = std::log(v);
    return v * l * l;
}

} // namespace detail

/// mu = b E[-V ln V], sigma^2 = b E[V ln^2 V] - mu^2, and the lattice span.
///
/// closed_form exists for BinarySearch and Deterministic only; `budget` is the
/// sample count for monte_carlo and is ignored otherwise.
inline FamilyConstants family_constants(const SplitFamily& family, ConstantsMethod method,
                                        std::int64_t budget = 1'000'000,
                                        std::uint64_t seed = 1) {
    validate_family(family);
    const int b = branch_factor(family);
    FamilyConstants out;
    out.span_d = lattice_span(family);

    if (std::holds_alternative<BinarySearch>(family)) {
        // Constants of the search tree are known exactly.
        out.alpha = 1.0;
        out.varsigma = 2.0 * kEulerGamma - 4.0;
        out.zeta = 2.0 * kEulerGamma - 4.0;
    }

    if (const auto* d = std::get_if<Deterministic>(&family)) {
        // Degenerate law: every method reduces to plugging in V = 1/b.
        (void)method;
        out.mu = std::log(double(d->b));
        out.sigma2 = 0.0;
        return out;
    }

    switch (method) {
    case ConstantsMethod::closed_form:
        if (!std::holds_alternative<BinarySearch>(family))
            throw ValidationError("no closed form for family " + family_name(family));
        out.mu = 0.5;
        out.sigma2 = 0.25;
        return out;
    case ConstantsMethod::quadrature: {
        const auto m = *beta_marginal(family);
        out.mu = b * detail::beta_expectation(m, detail::neg_v_log_v);
        out.sigma2 = b * detail::beta_expectation(m, detail::v_log2_v) - out.mu * out.mu;
        return out;
    }
    case ConstantsMethod::monte_carlo: {
        if (budget <= 0) throw ValidationError("monte carlo budget must be positive");
        Rng rng(seed);
        std::vector<double> v(static_cast<std::size_t>(b));
        double s1 = 0.0, s2 = 0.0;
        for (std::int64_t i = 0; i < budget; ++i) {
            sample_split_vector(family, rng, v);
            s1 += detail::neg_v_log_v(v[0]);
            s2 += detail::v_log2_v(v[0]);
        }
        out.mu = b * s1 / double(budget);
        out.sigma2 = b * s2 / double(budget) - out.mu * out.mu;
        return out;
    }
    }
    return out;
}

/// Best available constants: closed form where it exists, quadrature otherwise.
inline FamilyConstants family_constants(const SplitFamily& family) {
    if (std::holds_alternative<BinarySearch>(family) || std::holds_alternative<Deterministic>(family))
        return family_constants(family, ConstantsMethod::closed_form);
    return family_constants(family, ConstantsMethod::quadrature);
}

/// Mellin transform m(t) = E[V_1^t].
inline double mellin(const SplitFamily& family, double t) {
    if (!(t > 0.0)) throw ValidationError("mellin requires t > 0");
    if (const auto* d = std::get_if<Deterministic>(&family)) return std::pow(double(d->b), -t);
    const auto m = *beta_marginal(family);
    return std::exp(std::lgamma(m.alpha + t) + std::lgamma(m.alpha + m.beta) -
                    std::lgamma(m.alpha) - std::lgamma(m.alpha + m.beta + t));
}

} // namespace splitperc
