#pragma once

// Seeded, replica-parallel Monte Carlo experiments and their reports.
//
// Every replica draws from derive_seed(master, group, replica), results are
// stored by replica index and aggregated in index order, so a report depends
// only on (config, seed) and never on the thread count.

#include "splitperc/error.hpp"
#include "splitperc/limitlaw.hpp"
#include "splitperc/perc.hpp"
#include "splitperc/regtree.hpp"
#include "splitperc/renewal.hpp"
#include "splitperc/rng.hpp"
#include "splitperc/splitvec.hpp"
#include "splitperc/stats.hpp"
#include "splitperc/treegen.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace splitperc {

using Json = nlohmann::ordered_json;

enum class ExperimentKind { lln, fluct, identity, regular, renewal, depth, levy_tail };
enum class ReportFormat { json, csv };

inline std::string kind_name(ExperimentKind kind) {
    switch (kind) {
    case ExperimentKind::lln: return "lln";
    case ExperimentKind::fluct: return "fluct";
    case ExperimentKind::identity: return "identity";
    case ExperimentKind::regular: return "regular";
    case ExperimentKind::renewal: return "renewal";
    case ExperimentKind::depth: return "depth";
    case ExperimentKind::levy_tail: return "levy_tail";
    }
    return "?";
}

inline ExperimentKind parse_kind(std::string_view name) {
    for (auto k : {ExperimentKind::lln, ExperimentKind::fluct, ExperimentKind::identity,
                   ExperimentKind::regular, ExperimentKind::renewal, ExperimentKind::depth,
                   ExperimentKind::levy_tail})
        if (kind_name(k) == name) return k;
    throw ValidationError("unknown experiment '" + std::string(name) + "'");
}

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::lln;
    std::string family = "bst";
    // Unset values fall back to the family's default parameters.
    std::optional<int> s, s0, s1;
    double c = 1.0;
    std::vector<std::int64_t> n{std::int64_t(1) << 16};
    std::vector<int> h{20};
    int b = 2;   // branch factor of the complete tree (regular only)
    std::int64_t replicas = 100;
    std::uint64_t seed = 42;
    int threads = 1;
    std::string out = "report.json";
    ReportFormat format = ReportFormat::json;
    bool emit_samples = false;
    bool timing = false;

    // renewal
    double z = 8.0;
    double z_step = 0.25;
    std::int64_t budget = kExploreBudget;
    // levy_tail
    double x = 1.0;
    // depth: balls drawn per tree
    std::int64_t draws = 1000;
    // regular: visit every vertex instead of sampling generation sizes
    bool traverse = false;
    // fluct: order statistics for the Hill estimate
    std::int64_t hill_k = 200;
    // limit-law numerics
    double tol = 1e-6;
    // fluct: constants for families without closed forms
    std::optional<double> alpha, varsigma, zeta;
};

/// Split-tree parameters named by the config.
inline SplitParams config_params(const ExperimentConfig& cfg) {
    const SplitFamily family = parse_family(cfg.family);
    const SplitParams defaults = default_params(family);
    return make_params(family, cfg.s.value_or(defaults.s), cfg.s0.value_or(defaults.s0),
                       cfg.s1.value_or(defaults.s1));
}

/// z grid 0, z_step, ..., up to z.
inline std::vector<double> renewal_grid(double z, double step) {
    std::vector<double> grid;
    const auto count = std::int64_t(std::floor(z / step + 1e-9));
    for (std::int64_t i = 0; i <= count; ++i) grid.push_back(double(i) * step);
    if (grid.back() < z - 1e-12) grid.push_back(z);
    return grid;
}

/// Checks every precondition of the experiment before any work starts.
inline void validate_config(const ExperimentConfig& cfg) {
    if (cfg.threads < 1) throw ValidationError("threads must be at least 1");
    if (cfg.replicas < 1) throw ValidationError("replicas must be at least 1");
    if (!(cfg.tol > 0.0 && cfg.tol <= 1e-3)) throw ValidationError("tol must lie in (0, 1e-3]");
    if (!(cfg.c >= 0.0) || !std::isfinite(cfg.c)) throw ValidationError("c must be a finite value >= 0");

    if (cfg.kind == ExperimentKind::regular) {
        if (cfg.b < 2 || cfg.b > 64) throw ValidationError("regular tree needs 2 <= b <= 64");
        if (cfg.h.empty()) throw ValidationError("h grid is empty");
        for (int h : cfg.h) {
            if (h < 1) throw ValidationError("regular tree needs h >= 1");
            const std::int64_t n_h = regular_size(cfg.b, h);
            if (cfg.traverse && n_h > kRegularFullBudget)
                throw BudgetExceeded("complete tree of height " + std::to_string(h) +
                                     " exceeds the traversal budget");
        }
        return;
    }

    const SplitParams params = config_params(cfg);
    const SplitFamily& family = params.family;
    if (cfg.kind == ExperimentKind::renewal) {
        if (!(cfg.z >= 0.0) || !std::isfinite(cfg.z)) throw ValidationError("z must be finite and >= 0");
        if (!(cfg.z_step > 0.0)) throw ValidationError("z step must be positive");
        if (cfg.z / cfg.z_step > 1e6) throw ValidationError("renewal grid too fine");
        if (cfg.budget < 1) throw ValidationError("budget must be positive");
        return;
    }

    if (cfg.n.empty()) throw ValidationError("n grid is empty");
    for (std::int64_t n : cfg.n) {
        if (n < 1) throw ValidationError("n must be at least 1");
        if (n > kMaxBalls) throw BudgetExceeded("n exceeds the ball-count capacity");
    }
    const bool percolates = cfg.kind == ExperimentKind::lln || cfg.kind == ExperimentKind::fluct ||
                            cfg.kind == ExperimentKind::identity ||
                            cfg.kind == ExperimentKind::levy_tail;
    if (percolates)
        for (std::int64_t n : cfg.n) percolation_param(double(n), cfg.c);
    switch (cfg.kind) {
    case ExperimentKind::fluct:
        for (std::int64_t n : cfg.n)
            if (n < 16) throw ValidationError("fluctuation statistic needs n >= 16");
        if (!(cfg.c > 0.0)) throw ValidationError("fluctuation experiment needs c > 0");
        if (cfg.hill_k < 1) throw ValidationError("hill k must be at least 1");
        if (cfg.alpha && !(*cfg.alpha > 0.0)) throw ValidationError("alpha must be positive");
        break;
    case ExperimentKind::identity:
        if (cfg.replicas < 2) throw ValidationError("identity check needs at least two replicas");
        break;
    case ExperimentKind::depth:
        if (cfg.draws < 1) throw ValidationError("draws must be at least 1");
        break;
    case ExperimentKind::levy_tail:
        if (!(cfg.x > 0.0)) throw ValidationError("x must be positive");
        if (!(cfg.c > 0.0)) throw ValidationError("levy tail needs c > 0");
        for (std::int64_t n : cfg.n)
            if (n < 16) throw ValidationError("levy tail needs n >= 16");
        break;
    default:
        break;
    }
    (void)family;
}

// ---------------------------------------------------------------------------
// Replica scheduling
// ---------------------------------------------------------------------------

/// Runs fn(i) for i in [0, count) on a shared work queue and returns the
/// results in index order. The exception of the lowest failing index wins.
template <class T, class F>
std::vector<T> parallel_map(std::int64_t count, int threads, F&& fn) {
    std::vector<T> out(static_cast<std::size_t>(count));
    std::atomic<std::int64_t> next{0};
    std::mutex guard;
    std::exception_ptr error;
    std::int64_t error_index = std::numeric_limits<std::int64_t>::max();
    auto worker = [&] {
        for (;;) {
            const std::int64_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                out[std::size_t(i)] = fn(i);
            } catch (...) {
                std::lock_guard lock(guard);
                if (i < error_index) {
                    error_index = i;
                    error = std::current_exception();
                }
            }
        }
    };
    const int n_workers = int(std::min<std::int64_t>(threads, std::max<std::int64_t>(count, 1)));
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
    return out;
}

// ---------------------------------------------------------------------------
// Normalised statistics
// ---------------------------------------------------------------------------

/// (G-hat / n - e^{-c/mu}) ln n - (c/mu) e^{-c/mu} ln ln n.
inline double fluct_statistic(double ghat, double n, double c, double mu) {
    if (!(n >= 16.0)) throw ValidationError("fluctuation statistic needs n >= 16");
    if (!(mu > 0.0)) throw ValidationError("mu must be positive");
    const double e = std::exp(-c / mu);
    const double ln_n = std::log(n);
    return (ghat / n - e) * ln_n - (c / mu) * e * std::log(ln_n);
}

/// Vertex analogue: (G / n - alpha e^{-c/mu}) ln n - (c alpha / mu) e^{-c/mu} ln ln n.
inline double fluct_vertex_statistic(double g, double n, double c, double mu, double alpha) {
    if (!(n >= 16.0)) throw ValidationError("fluctuation statistic needs n >= 16");
    if (!(mu > 0.0)) throw ValidationError("mu must be positive");
    const double e = std::exp(-c / mu);
    const double ln_n = std::log(n);
    return (g / n - alpha * e) * ln_n - (c * alpha / mu) * e * std::log(ln_n);
}

struct FamilyEstimates {
    double alpha_hat = 0.0;
    double alpha_stderr = 0.0;
    double varsigma_hat = 0.0;
    double varsigma_stderr = 0.0;
    double zeta_hat = 0.0;
    double zeta_stderr = 0.0;
};

/// alpha from the least-squares slope of mean N on n; varsigma and zeta as
/// grid means of mean Psi/n - ln n / mu and mean Upsilon/n - alpha ln n / mu.
inline FamilyEstimates estimate_family_constants(const SplitParams& params,
                                                 const std::vector<std::int64_t>& n_grid,
                                                 std::int64_t replicas, std::uint64_t seed,
                                                 int threads = 1) {
    validate_params(params);
    if (is_lattice(params.family))
        throw ValidationError("varsigma is not constant for lattice families");
    if (n_grid.size() < 3) throw ValidationError("estimation grid needs at least 3 points");
    const auto [lo, hi] = std::minmax_element(n_grid.begin(), n_grid.end());
    if (*lo < 2 || double(*hi) < 4.0 * double(*lo))
        throw ValidationError("estimation grid must span at least two octaves");
    if (replicas < 2) throw ValidationError("estimation needs at least two replicas");
    const double mu = family_constants(params.family).mu;

    struct Point {
        Summary vertices, psi, upsilon;
    };
    std::vector<Point> points(n_grid.size());
    for (std::size_t g = 0; g < n_grid.size(); ++g) {
        const std::int64_t n = n_grid[g];
        const auto stats = parallel_map<std::array<double, 3>>(replicas, threads, [&](std::int64_t r) {
            const auto st = tree_stats(build_tree(params, n, derive_seed(seed, 100 + g, std::uint64_t(r))));
            return std::array<double, 3>{double(st.vertex_count), double(st.ball_path_length) / double(n),
                                         double(st.vertex_path_length) / double(n)};
        });
        for (const auto& s : stats) {
            points[g].vertices.push(s[0]);
            points[g].psi.push(s[1]);
            points[g].upsilon.push(s[2]);
        }
    }

    FamilyEstimates out;
    double n_mean = 0.0;
    for (auto n : n_grid) n_mean += double(n);
    n_mean /= double(n_grid.size());
    double sxx = 0.0;
    for (auto n : n_grid) sxx += (double(n) - n_mean) * (double(n) - n_mean);
    double slope_var = 0.0;
    for (std::size_t g = 0; g < n_grid.size(); ++g) {
        const double w = (double(n_grid[g]) - n_mean) / sxx;
        out.alpha_hat += w * points[g].vertices.mean;
        slope_var += w * w * std::pow(points[g].vertices.stderr_mean(), 2);
    }
    out.alpha_stderr = std::sqrt(slope_var);

    const double k = double(n_grid.size());
    double var_s = 0.0, var_z = 0.0;
    for (std::size_t g = 0; g < n_grid.size(); ++g) {
        const double ln_n = std::log(double(n_grid[g]));
        out.varsigma_hat += (points[g].psi.mean - ln_n / mu) / k;
        out.zeta_hat += (points[g].upsilon.mean - out.alpha_hat * ln_n / mu) / k;
        var_s += std::pow(points[g].psi.stderr_mean(), 2) / (k * k);
        var_z += std::pow(points[g].upsilon.stderr_mean(), 2) / (k * k);
    }
    out.varsigma_stderr = std::sqrt(var_s);
    out.zeta_stderr = std::sqrt(var_z);
    return out;
}

// ---------------------------------------------------------------------------
// Report helpers
// ---------------------------------------------------------------------------

namespace detail {

inline Json summary_json(std::vector<double> xs) {
    Json j;
    j["count"] = xs.size();
    if (xs.empty()) return j;
    const Summary s = summarize(xs);
    std::sort(xs.begin(), xs.end());
    j["mean"] = s.mean;
    j["stderr"] = s.stderr_mean();
    j["stddev"] = s.stddev();
    j["min"] = xs.front();
    j["q05"] = quantile_sorted(xs, 0.05);
    j["q25"] = quantile_sorted(xs, 0.25);
    j["median"] = quantile_sorted(xs, 0.5);
    j["q75"] = quantile_sorted(xs, 0.75);
    j["q95"] = quantile_sorted(xs, 0.95);
    j["max"] = xs.back();
    return j;
}

inline Json config_json(const ExperimentConfig& cfg) {
    Json j;
    j["experiment"] = kind_name(cfg.kind);
    j["seed"] = cfg.seed;
    j["replicas"] = cfg.replicas;
    j["c"] = cfg.c;
    if (cfg.kind == ExperimentKind::regular) {
        j["b"] = cfg.b;
        j["h"] = cfg.h;
        j["traverse"] = cfg.traverse;
        return j;
    }
    const SplitParams p = config_params(cfg);
    j["family"] = family_name(p.family);
    j["b"] = p.b;
    j["s"] = p.s;
    j["s0"] = p.s0;
    j["s1"] = p.s1;
    switch (cfg.kind) {
    case ExperimentKind::renewal:
        j["z"] = cfg.z;
        j["z_step"] = cfg.z_step;
        j["budget"] = cfg.budget;
        break;
    case ExperimentKind::depth:
        j["n"] = cfg.n;
        j["draws"] = cfg.draws;
        break;
    case ExperimentKind::levy_tail:
        j["n"] = cfg.n;
        j["x"] = cfg.x;
        break;
    case ExperimentKind::fluct:
        j["n"] = cfg.n;
        j["hill_k"] = cfg.hill_k;
        j["tol"] = cfg.tol;
        break;
    default:
        j["n"] = cfg.n;
        break;
    }
    return j;
}

inline Json law_json(const LimitLaw& law, double tol) {
    Json j;
    j["label"] = law.label;
    j["loc"] = law.loc;
    j["scale"] = law.scale;
    j["median"] = median(law, tol);
    j["q25"] = quantile(law, 0.25, tol);
    j["q75"] = quantile(law, 0.75, tol);
    return j;
}

inline std::optional<double> try_hill(const std::vector<double>& xs, std::int64_t k) {
    try {
        return hill_estimator(xs, std::size_t(k));
    } catch (const ValidationError&) {
        return std::nullopt;
    }
}

} // namespace detail

/// Output of run_experiment: the JSON report plus the flat sample table used
/// for CSV output. `column` names the grid variable of the table.
struct ExperimentReport {
    Json json;
    std::string column = "n";
    std::vector<std::int64_t> grid_value;
    std::vector<std::int64_t> replica;
    std::vector<double> statistic;
    // Renewal grids are written as (z, mean, stderr) rows instead.
    std::vector<std::array<double, 3>> renewal_rows;

    void add_samples(std::int64_t g, const std::vector<double>& values) {
        for (std::size_t r = 0; r < values.size(); ++r) {
            grid_value.push_back(g);
            replica.push_back(std::int64_t(r));
            statistic.push_back(values[r]);
        }
    }
};

/// Edges in the subtree spanned by the root and the vertices u and v.
inline std::int32_t spanning_edges(const SplitTree& tree, VertexId u, VertexId v) {
    std::int32_t edges = 0;
    while (tree.depth[std::size_t(u)] > tree.depth[std::size_t(v)]) {
        u = tree.parent[std::size_t(u)];
        ++edges;
    }
    while (tree.depth[std::size_t(v)] > tree.depth[std::size_t(u)]) {
        v = tree.parent[std::size_t(v)];
        ++edges;
    }
    while (u != v) {
        u = tree.parent[std::size_t(u)];
        v = tree.parent[std::size_t(v)];
        edges += 2;
    }
    return edges + tree.depth[std::size_t(u)];
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

namespace detail {

struct Constants {
    FamilyConstants base;
    std::optional<double> alpha, varsigma, zeta;
    bool estimated = false;
};

inline Constants resolve_constants(const ExperimentConfig& cfg, const SplitParams& params,
                                   bool need_estimates) {
    Constants k;
    k.base = family_constants(params.family);
    const bool bst_shape = std::holds_alternative<BinarySearch>(params.family) && params.s == 1 &&
                           params.s0 == 1 && params.s1 == 0;
    if (bst_shape) {
        k.alpha = k.base.alpha;
        k.varsigma = k.base.varsigma;
        k.zeta = k.base.zeta;
    }
    if (cfg.alpha) k.alpha = cfg.alpha;
    if (cfg.varsigma) k.varsigma = cfg.varsigma;
    if (cfg.zeta) k.zeta = cfg.zeta;
    if (need_estimates && !is_lattice(params.family) && (!k.alpha || !k.varsigma || !k.zeta)) {
        const auto est = estimate_family_constants(
            params, {std::int64_t(1) << 12, std::int64_t(1) << 14, std::int64_t(1) << 16}, 100,
            derive_seed(cfg.seed, 99), cfg.threads);
        if (!k.alpha) k.alpha = est.alpha_hat;
        if (!k.varsigma) k.varsigma = est.varsigma_hat;
        if (!k.zeta) k.zeta = est.zeta_hat;
        k.estimated = true;
    }
    return k;
}

inline Json constants_json(const Constants& k) {
    Json j;
    j["mu"] = k.base.mu;
    j["sigma2"] = k.base.sigma2;
    j["span_d"] = k.base.span_d;
    j["alpha"] = k.alpha ? Json(*k.alpha) : Json(nullptr);
    j["varsigma"] = k.varsigma ? Json(*k.varsigma) : Json(nullptr);
    j["zeta"] = k.zeta ? Json(*k.zeta) : Json(nullptr);
    j["estimated"] = k.estimated;
    return j;
}

struct Ratios {
    std::vector<double> ghat, g, second_balls, second_vertices;
};

inline void run_lln(const ExperimentConfig& cfg, ExperimentReport& rep) {
    const SplitParams params = config_params(cfg);
    const FamilyConstants k = family_constants(params.family);
    const double target = std::exp(-cfg.c / k.mu);
    rep.json["targets"] = {{"ghat_over_n", target}};
    Json per_n = Json::array();
    for (std::size_t gi = 0; gi < cfg.n.size(); ++gi) {
        const std::int64_t n = cfg.n[gi];
        const double p = percolation_param(double(n), cfg.c);
        const auto rows = parallel_map<std::array<double, 5>>(cfg.replicas, cfg.threads, [&](std::int64_t r) {
            Rng rng(derive_seed(cfg.seed, gi, std::uint64_t(r)));
            const SplitTree tree = build_tree(params, n, rng);
            const auto dec = percolate(tree, p, rng);
            return std::array<double, 5>{double(dec.root_balls) / double(n),
                                         double(dec.root_vertices) / double(n),
                                         double(dec.second_balls) / double(n),
                                         double(dec.second_vertices) / double(n), double(tree.size())};
        });
        Ratios r;
        std::vector<double> vertices;
        for (const auto& row : rows) {
            r.ghat.push_back(row[0]);
            r.g.push_back(row[1]);
            r.second_balls.push_back(row[2]);
            r.second_vertices.push_back(row[3]);
            vertices.push_back(row[4] / double(n));
        }
        Json e;
        e["n"] = n;
        e["p"] = p;
        e["ghat_over_n"] = summary_json(r.ghat);
        e["abs_error"] = std::abs(summarize(r.ghat).mean - target);
        e["g_over_n"] = summary_json(r.g);
        e["vertices_over_n"] = summary_json(vertices);
        e["second_balls_over_n"] = summary_json(r.second_balls);
        e["second_vertices_over_n"] = summary_json(r.second_vertices);
        per_n.push_back(e);
        rep.add_samples(n, r.ghat);
        if (cfg.emit_samples) rep.json["samples"][std::to_string(n)] = r.ghat;
    }
    rep.json["per_n"] = per_n;
}

inline void run_fluct(const ExperimentConfig& cfg, ExperimentReport& rep) {
    const SplitParams params = config_params(cfg);
    const bool lattice = is_lattice(params.family);
    const Constants k = resolve_constants(cfg, params, true);
    const double mu = k.base.mu;
    rep.json["constants"] = constants_json(k);

    std::optional<LimitLaw> ball_law, vertex_law;
    if (!lattice) {
        ball_law = theorem2_limit(cfg.c, mu, k.base.sigma2, *k.varsigma);
        vertex_law = theorem1_limit(cfg.c, mu, k.base.sigma2, *k.alpha, *k.zeta);
        rep.json["limit"] = law_json(*ball_law, cfg.tol);
        rep.json["vertex_limit"] = law_json(*vertex_law, cfg.tol);
    } else {
        rep.json["limit"] = nullptr;
        rep.json["note"] = "lattice family: no constant-shift limit law";
    }
    rep.json["tolerances"] = "engineering choices; no finite-n error bars are known";

    Json per_n = Json::array();
    Json ks = Json::array();
    Json hill = Json::array();
    for (std::size_t gi = 0; gi < cfg.n.size(); ++gi) {
        const std::int64_t n = cfg.n[gi];
        const double p = percolation_param(double(n), cfg.c);
        const auto rows = parallel_map<RootCluster>(cfg.replicas, cfg.threads, [&](std::int64_t r) {
            Rng rng(derive_seed(cfg.seed, gi, std::uint64_t(r)));
            return sample_root_cluster(params, n, p, rng);
        });
        std::vector<double> stat, vstat, lower;
        for (const auto& rc : rows) {
            stat.push_back(fluct_statistic(double(rc.balls), double(n), cfg.c, mu));
            if (k.alpha)
                vstat.push_back(fluct_vertex_statistic(double(rc.vertices), double(n), cfg.c, mu, *k.alpha));
        }
        for (double s : stat) lower.push_back(-s);
        Json e;
        e["n"] = n;
        e["statistic"] = summary_json(stat);
        if (!vstat.empty()) e["vertex_statistic"] = summary_json(vstat);
        Json ks_e{{"n", n}};
        if (ball_law) {
            const double m = rep.json["limit"]["median"].get<double>();
            e["median_minus_limit"] = sample_median(stat) - m;
            ks_e["ball"] = ks_distance(stat, [&](double x) { return cdf(*ball_law, x, cfg.tol); });
            if (!vstat.empty())
                ks_e["vertex"] = ks_distance(vstat, [&](double x) { return cdf(*vertex_law, x, cfg.tol); });
        }
        ks.push_back(ks_e);
        const auto h = try_hill(lower, cfg.hill_k);
        hill.push_back({{"n", n}, {"k", cfg.hill_k}, {"lower_tail", h ? Json(*h) : Json(nullptr)}});
        per_n.push_back(e);
        rep.add_samples(n, stat);
        if (cfg.emit_samples) rep.json["samples"][std::to_string(n)] = stat;
    }
    rep.json["per_n"] = per_n;
    rep.json["ks"] = ks;
    rep.json["hill"] = hill;
}

inline void run_identity(const ExperimentConfig& cfg, ExperimentReport& rep) {
    const SplitParams params = config_params(cfg);
    Json per_n = Json::array();
    for (std::size_t gi = 0; gi < cfg.n.size(); ++gi) {
        const std::int64_t n = cfg.n[gi];
        const double p = percolation_param(double(n), cfg.c);
        const std::uint64_t seed = derive_seed(cfg.seed, gi);
        const auto pairs = parallel_map<std::pair<double, double>>(
            cfg.replicas, cfg.threads, [&](std::int64_t r) { return identity_replica(params, n, p, seed, r); });
        const IdentityCheck chk = summarize_identity(pairs);
        std::vector<double> diffs;
        for (const auto& [x, y] : pairs) diffs.push_back(x - y);
        per_n.push_back({{"n", n},
                         {"p", p},
                         {"lhs", chk.lhs},
                         {"rhs", chk.rhs},
                         {"lhs_stderr", chk.lhs_stderr},
                         {"rhs_stderr", chk.rhs_stderr},
                         {"pooled_stderr", chk.pooled_stderr},
                         {"z_score", chk.pooled_stderr > 0.0 ? (chk.lhs - chk.rhs) / chk.pooled_stderr : 0.0}});
        rep.add_samples(n, diffs);
        if (cfg.emit_samples) rep.json["samples"][std::to_string(n)] = diffs;
    }
    rep.json["per_n"] = per_n;
}

inline void run_regular(const ExperimentConfig& cfg, ExperimentReport& rep) {
    rep.column = "h";
    Json per_h = Json::array();
    Json ks = Json::array();
    for (std::size_t gi = 0; gi < cfg.h.size(); ++gi) {
        const int h = cfg.h[gi];
        const double p = regular_percolation_param(h, cfg.c);
        const double n_h = double(regular_size(cfg.b, h));
        const auto rows = parallel_map<RegularOutcome>(cfg.replicas, cfg.threads, [&](std::int64_t r) {
            Rng rng(derive_seed(cfg.seed, gi, std::uint64_t(r)));
            if (cfg.traverse) return simulate_regular(cfg.b, h, p, rng, RegularMode::full);
            RegularOutcome o;
            o.root_cluster = sample_regular_root_cluster(cfg.b, h, p, rng);
            return o;
        });
        std::vector<double> frac, stat, second;
        for (const auto& o : rows) {
            frac.push_back(double(o.root_cluster) / n_h);
            if (h >= 2) stat.push_back(theorem4_statistic(o.root_cluster, cfg.b, h, cfg.c));
            if (o.second) second.push_back(double(*o.second) / n_h);
        }
        Json e;
        e["h"] = h;
        e["p"] = p;
        e["n_h"] = std::int64_t(n_h);
        e["g_over_n"] = summary_json(frac);
        e["g_over_n_target"] = std::exp(-cfg.c);
        if (!second.empty()) e["second_over_n"] = summary_json(second);
        Json ks_e{{"h", h}};
        if (h >= 2 && cfg.c > 0.0) {
            const double rho = regular_rho(cfg.b, h);
            const LimitLaw law = theorem4_limit(cfg.c, rho, cfg.b, cfg.tol);
            const LimitLaw alt = theorem4_limit_rescaled(cfg.c, rho, cfg.b, cfg.tol);
            e["rho"] = rho;
            e["statistic"] = summary_json(stat);
            e["limit"] = law_json(law, cfg.tol);
            e["limit_rescaled"] = law_json(alt, cfg.tol);
            e["median_minus_limit"] = sample_median(stat) - e["limit"]["median"].get<double>();
            ks_e["statistic"] = ks_distance(stat, [&](double x) { return cdf(law, x, cfg.tol); });
            ks_e["statistic_rescaled"] = ks_distance(stat, [&](double x) { return cdf(alt, x, cfg.tol); });
        }
        ks.push_back(ks_e);
        per_h.push_back(e);
        rep.add_samples(h, h >= 2 ? stat : frac);
        if (cfg.emit_samples) rep.json["samples"][std::to_string(h)] = h >= 2 ? stat : frac;
    }
    rep.json["per_n"] = per_h;
    rep.json["ks"] = ks;
}

inline void run_renewal(const ExperimentConfig& cfg, ExperimentReport& rep, std::int64_t& failures) {
    const SplitParams params = config_params(cfg);
    const FamilyConstants k = family_constants(params.family);
    const std::vector<double> grid = renewal_grid(cfg.z, cfg.z_step);
    const auto reps = parallel_map<RenewalReplica>(cfg.replicas, cfg.threads, [&](std::int64_t r) {
        Rng rng(derive_seed(cfg.seed, 0, std::uint64_t(r)));
        return renewal_replica(params.family, k.mu, grid, rng, cfg.budget);
    });
    std::vector<Summary> points(grid.size());
    std::vector<double> trap, exact, at_z;
    for (const auto& r : reps) {
        if (r.failed) {
            ++failures;
            continue;
        }
        for (std::size_t i = 0; i < grid.size(); ++i) points[i].push(double(r.counts[i]));
        trap.push_back(r.integral_trapezoid);
        exact.push_back(r.integral_exact);
        at_z.push_back(double(r.counts.back()));
    }
    Json profile = Json::array();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        profile.push_back({{"z", grid[i]}, {"mean", points[i].mean}, {"stderr", points[i].stderr_mean()}});
        rep.renewal_rows.push_back({grid[i], points[i].mean, points[i].stderr_mean()});
    }
    Json e;
    e["z"] = grid.back();
    e["count"] = summary_json(at_z);
    e["first_order_target"] = std::exp(grid.back()) / k.mu;
    e["integral_trapezoid"] = summary_json(trap);
    e["integral_exact"] = summary_json(exact);
    e["second_order_target"] = (k.sigma2 - k.mu * k.mu) / (2.0 * k.mu * k.mu) - 1.0 / k.mu;
    e["lattice"] = is_lattice(params.family);
    if (const auto* d = std::get_if<Deterministic>(&params.family))
        e["exact"] = deterministic_renewal(d->b, grid.back());
    rep.json["per_n"] = Json::array({e});
    rep.json["profile"] = profile;
    if (cfg.emit_samples) rep.json["samples"]["count_at_z"] = at_z;
}

inline void run_depth(const ExperimentConfig& cfg, ExperimentReport& rep) {
    const SplitParams params = config_params(cfg);
    const Constants k = resolve_constants(cfg, params, false);
    const double mu = k.base.mu;
    Json per_n = Json::array();
    struct TreeDraws {
        std::vector<std::int32_t> depth, lca;
        double psi_over_n = 0.0;
        std::int32_t height = 0;
        bool spanning_ok = true;
    };
    for (std::size_t gi = 0; gi < cfg.n.size(); ++gi) {
        const std::int64_t n = cfg.n[gi];
        const auto trees = parallel_map<TreeDraws>(cfg.replicas, cfg.threads, [&](std::int64_t r) {
            Rng rng(derive_seed(cfg.seed, gi, std::uint64_t(r)));
            const SplitTree tree = build_tree(params, n, rng);
            const BallPicker picker(tree);
            TreeDraws out;
            const auto st = tree_stats(tree);
            out.psi_over_n = double(st.ball_path_length) / double(n);
            out.height = st.height;
            for (std::int64_t d = 0; d < cfg.draws; ++d) {
                const BallPair pair = sample_ball_pair(tree, picker, rng);
                const auto d1 = tree.depth[std::size_t(pair.first)];
                const auto d2 = tree.depth[std::size_t(pair.second)];
                out.depth.push_back(d1);
                out.lca.push_back(pair.lca_depth);
                if (spanning_edges(tree, pair.first, pair.second) != d1 + d2 - pair.lca_depth)
                    out.spanning_ok = false;
            }
            return out;
        });
        Summary depth;
        std::vector<double> psi, lca, height_ratio, depth_samples;
        bool spanning_ok = true;
        for (const auto& t : trees) {
            for (auto d : t.depth) {
                depth.push(double(d));
                depth_samples.push_back(double(d));
            }
            for (auto l : t.lca) lca.push_back(double(l));
            psi.push_back(t.psi_over_n);
            height_ratio.push_back(double(t.height) / std::log(double(n)));
            spanning_ok = spanning_ok && t.spanning_ok;
        }
        const double ln_n = std::log(double(n));
        Json e;
        e["n"] = n;
        e["depth_mean"] = depth.mean;
        e["depth_mean_stderr"] = depth.stderr_mean();
        e["depth_variance"] = depth.variance();
        e["depth_mean_target"] = k.varsigma ? Json(ln_n / mu + *k.varsigma) : Json(nullptr);
        e["depth_variance_target"] = k.base.sigma2 / (mu * mu * mu) * ln_n;
        e["psi_over_n"] = summary_json(psi);
        e["lca_depth"] = summary_json(lca);
        e["lca_median_over_lnln_n"] = sample_median(lca) / std::log(ln_n);
        e["height_over_ln_n"] = summary_json(height_ratio);
        e["spanning_identity"] = spanning_ok;
        per_n.push_back(e);
        rep.add_samples(n, psi);
        if (cfg.emit_samples) rep.json["samples"][std::to_string(n)] = depth_samples;
    }
    rep.json["per_n"] = per_n;
}

inline void run_levy_tail(const ExperimentConfig& cfg, ExperimentReport& rep) {
    const SplitParams params = config_params(cfg);
    const FamilyConstants k = family_constants(params.family);
    const double mu = k.mu;
    const double nu = (cfg.c / mu) * std::exp(-cfg.c / mu) / cfg.x;
    const bool bst_shape = std::holds_alternative<BinarySearch>(params.family) && params.s == 1 &&
                           params.s0 == 1 && params.s1 == 0;
    Json per_n = Json::array();
    for (std::size_t gi = 0; gi < cfg.n.size(); ++gi) {
        const std::int64_t n = cfg.n[gi];
        const double ln_n = std::log(double(n));
        const auto m = std::int32_t(std::floor(2.0 * std::log(ln_n) / std::log(double(params.b))));
        const double threshold = cfg.x * std::exp(cfg.c / mu) * double(n) / ln_n;
        const auto rows = parallel_map<std::array<double, 2>>(cfg.replicas, cfg.threads, [&](std::int64_t r) {
            Rng rng(derive_seed(cfg.seed, gi, std::uint64_t(r)));
            const SplitTree tree = build_tree(params, n, rng);
            std::int64_t all = 0, deepest = 0;
            for (std::size_t u = 1; u < tree.size(); ++u) {
                const auto d = tree.depth[u];
                if (d > m || double(tree.subtree_balls[u]) <= threshold) continue;
                ++all;
                if (d == m) ++deepest;
            }
            return std::array<double, 2>{cfg.c / ln_n * double(all), cfg.c / ln_n * double(deepest)};
        });
        std::vector<double> all, deepest;
        for (const auto& row : rows) {
            all.push_back(row[0]);
            deepest.push_back(row[1]);
        }
        Json e;
        e["n"] = n;
        e["m"] = m;
        e["levels_1_to_m"] = summary_json(all);
        e["level_m_only"] = summary_json(deepest);
        e["nu"] = nu;
        if (bst_shape) {
            // Renewal count of vertices with subtree share above y: 2/y - 2 for
            // uniform splits, here with y = threshold / n.
            const double y = threshold / double(n);
            e["finite_n_oracle"] = y < 1.0 ? cfg.c / ln_n * (2.0 / y - 2.0) : 0.0;
        }
        per_n.push_back(e);
        rep.add_samples(n, all);
        if (cfg.emit_samples) rep.json["samples"][std::to_string(n)] = all;
    }
    rep.json["per_n"] = per_n;
}

} // namespace detail

/// Runs the configured experiment. Validation happens before any sampling.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);
    const auto start = std::chrono::steady_clock::now();
    ExperimentReport rep;
    rep.json["config"] = detail::config_json(cfg);
    std::int64_t failures = 0;
    switch (cfg.kind) {
    case ExperimentKind::lln: detail::run_lln(cfg, rep); break;
    case ExperimentKind::fluct: detail::run_fluct(cfg, rep); break;
    case ExperimentKind::identity: detail::run_identity(cfg, rep); break;
    case ExperimentKind::regular: detail::run_regular(cfg, rep); break;
    case ExperimentKind::renewal: detail::run_renewal(cfg, rep, failures); break;
    case ExperimentKind::depth: detail::run_depth(cfg, rep); break;
    case ExperimentKind::levy_tail: detail::run_levy_tail(cfg, rep); break;
    }
    if (!rep.json.contains("ks")) rep.json["ks"] = nullptr;
    if (!rep.json.contains("hill")) rep.json["hill"] = nullptr;
    rep.json["failures"] = failures;
    // Wall-clock time would break byte-identical reruns, so it is opt-in.
    if (cfg.timing)
        rep.json["runtime_ms"] =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

inline std::string render_report(const ExperimentReport& rep, ReportFormat format) {
    std::ostringstream os;
    if (format == ReportFormat::json) {
        os << rep.json.dump(2) << '\n';
        return os.str();
    }
    os.precision(17);
    if (!rep.renewal_rows.empty()) {
        os << "z,mean,stderr\n";
        for (const auto& row : rep.renewal_rows) os << row[0] << ',' << row[1] << ',' << row[2] << '\n';
        return os.str();
    }
    os << rep.column << ",replica,statistic\n";
    for (std::size_t i = 0; i < rep.statistic.size(); ++i)
        os << rep.grid_value[i] << ',' << rep.replica[i] << ',' << rep.statistic[i] << '\n';
    return os.str();
}

inline void write_report(const ExperimentReport& rep, const std::string& path, ReportFormat format) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open output file '" + path + "'");
    f << render_report(rep, format);
    if (!f) throw ValidationError("failed writing output file '" + path + "'");
}

} // namespace splitperc
