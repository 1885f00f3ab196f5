#pragma once

// Command-line front end. Settings come from a flat key = value file, then
// the environment (SPLITPERC_SEED, SPLITPERC_THREADS), then flags, each layer
// overriding the previous one.

#include "splitperc/error.hpp"
#include "splitperc/harness.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <cstdlib>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace splitperc {

enum ExitCode : int {
    exit_ok = 0,
    exit_failure = 1,   // numerical or I/O trouble
    exit_usage = 2,     // validation errors and bad arguments
    exit_budget = 3,
    exit_acceptance = 4,
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string_view::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(a, b - a + 1));
}

template <class T>
T parse_number(std::string_view text, std::string_view key) {
    const std::string t = trim(text);
    T value{};
    const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
        throw ValidationError("invalid value '" + t + "' for " + std::string(key));
    return value;
}

template <class T>
std::vector<T> parse_list(std::string_view text, std::string_view key) {
    std::vector<T> out;
    std::string item;
    for (char ch : std::string(text) + ",") {
        if (ch == ',' || ch == ' ' || ch == '\t') {
            if (!trim(item).empty()) out.push_back(parse_number<T>(item, key));
            item.clear();
        } else {
            item += ch;
        }
    }
    if (out.empty()) throw ValidationError("empty list for " + std::string(key));
    return out;
}

inline bool parse_bool(std::string_view text, std::string_view key) {
    const std::string t = trim(text);
    if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
    if (t == "0" || t == "false" || t == "no" || t == "off") return false;
    throw ValidationError("invalid boolean '" + t + "' for " + std::string(key));
}

inline std::string normalize_key(std::string_view key) {
    std::string k = trim(key);
    while (!k.empty() && k.front() == '-') k.erase(k.begin());
    for (char& ch : k)
        if (ch == '-') ch = '_';
    return k;
}

} // namespace detail

/// Applies one setting. Keys match the long flag names, with '-' or '_'.
inline void apply_setting(ExperimentConfig& cfg, std::string_view raw_key, std::string_view value) {
    using namespace detail;
    const std::string key = normalize_key(raw_key);
    if (key == "family") cfg.family = trim(value);
    else if (key == "s") cfg.s = parse_number<int>(value, key);
    else if (key == "s0") cfg.s0 = parse_number<int>(value, key);
    else if (key == "s1") cfg.s1 = parse_number<int>(value, key);
    else if (key == "c") cfg.c = parse_number<double>(value, key);
    else if (key == "n") cfg.n = parse_list<std::int64_t>(value, key);
    else if (key == "h") cfg.h = parse_list<int>(value, key);
    else if (key == "b") cfg.b = parse_number<int>(value, key);
    else if (key == "reps" || key == "replicas") cfg.replicas = parse_number<std::int64_t>(value, key);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(value, key);
    else if (key == "threads") cfg.threads = parse_number<int>(value, key);
    else if (key == "out") cfg.out = trim(value);
    else if (key == "format") {
        const std::string f = trim(value);
        if (f == "json") cfg.format = ReportFormat::json;
        else if (f == "csv") cfg.format = ReportFormat::csv;
        else throw ValidationError("format must be json or csv");
    }
    else if (key == "emit_samples") cfg.emit_samples = parse_bool(value, key);
    else if (key == "timing") cfg.timing = parse_bool(value, key);
    else if (key == "z") cfg.z = parse_number<double>(value, key);
    else if (key == "z_step") cfg.z_step = parse_number<double>(value, key);
    else if (key == "budget") cfg.budget = parse_number<std::int64_t>(value, key);
    else if (key == "x") cfg.x = parse_number<double>(value, key);
    else if (key == "draws") cfg.draws = parse_number<std::int64_t>(value, key);
    else if (key == "traverse") cfg.traverse = parse_bool(value, key);
    else if (key == "hill_k") cfg.hill_k = parse_number<std::int64_t>(value, key);
    else if (key == "tol") cfg.tol = parse_number<double>(value, key);
    else if (key == "alpha") cfg.alpha = parse_number<double>(value, key);
    else if (key == "varsigma") cfg.varsigma = parse_number<double>(value, key);
    else if (key == "zeta") cfg.zeta = parse_number<double>(value, key);
    else throw ValidationError("unknown setting '" + std::string(raw_key) + "'");
}

/// Reads "key = value" lines; '#' starts a comment.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::size_t line_no = 0, start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        if (detail::trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ValidationError("config line " + std::to_string(line_no) + " has no '='");
        out.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return out;
}

inline std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot read config file '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

struct CliInvocation {
    std::string subcommand;
    std::vector<std::pair<std::string, std::string>> flags;
    std::optional<std::string> config_file;
    ExperimentConfig config;
};

namespace detail {

struct FlagSpec {
    const char* name;
    const char* help;
    bool is_switch = false;
};

inline const std::vector<FlagSpec>& flag_specs() {
    static const std::vector<FlagSpec> specs{
        {"family", "split-vector family: bst, spacings:B, deterministic:B, dirichlet:B:A"},
        {"s", "vertex capacity"},
        {"s0", "balls kept by internal vertices"},
        {"s1", "balls given to each child at a split"},
        {"c", "percolation constant"},
        {"n", "ball counts, comma separated"},
        {"h", "complete-tree heights, comma separated (regular)"},
        {"b", "branch factor of the complete tree (regular)"},
        {"reps", "replicas per grid point"},
        {"seed", "master seed"},
        {"threads", "worker threads"},
        {"out", "report path"},
        {"format", "json or csv"},
        {"emit-samples", "store every sample in the report", true},
        {"timing", "record runtime_ms in the report", true},
        {"z", "largest renewal grid point (renewal)"},
        {"z-step", "renewal grid step (renewal)"},
        {"budget", "vertex budget per exploration (renewal)"},
        {"x", "jump-size threshold (levy_tail)"},
        {"draws", "balls drawn per tree (depth)"},
        {"traverse", "visit every vertex (regular)", true},
        {"hill-k", "order statistics used by the Hill estimate (fluct)"},
        {"tol", "absolute tolerance of limit-law cdfs"},
        {"alpha", "override alpha"},
        {"varsigma", "override varsigma"},
        {"zeta", "override zeta"},
    };
    return specs;
}

} // namespace detail

/// Parses argv into an invocation. Throws CLI::ParseError on usage errors and
/// ValidationError on bad values.
inline CliInvocation parse_invocation(int argc, const char* const* argv,
                                      const std::map<std::string, std::string>& env,
                                      CLI::App& app) {
    CliInvocation inv;
    app.require_subcommand(1);
    // "-h" would clash with the --h height flag; subcommands inherit this.
    app.set_help_flag("--help", "print this help and exit");
    struct Slot {
        std::string name;
        std::string value;
        bool flag = false;
        CLI::Option* opt = nullptr;
    };
    std::vector<std::unique_ptr<Slot>> slots;
    std::string config_path;
    std::vector<std::pair<CLI::App*, ExperimentKind>> subs;
    for (auto kind : {ExperimentKind::lln, ExperimentKind::fluct, ExperimentKind::identity,
                      ExperimentKind::regular, ExperimentKind::renewal, ExperimentKind::depth,
                      ExperimentKind::levy_tail}) {
        CLI::App* sub = app.add_subcommand(kind_name(kind), "run the " + kind_name(kind) + " experiment");
        sub->add_option("--config", config_path, "flat key = value settings file");
        for (const auto& spec : detail::flag_specs()) {
            auto slot = std::make_unique<Slot>();
            slot->name = spec.name;
            slot->flag = spec.is_switch;
            if (spec.is_switch) slot->opt = sub->add_flag(std::string("--") + spec.name, spec.help);
            else slot->opt = sub->add_option(std::string("--") + spec.name, slot->value, spec.help);
            slots.push_back(std::move(slot));
        }
        subs.emplace_back(sub, kind);
    }
    app.parse(argc, argv);

    for (const auto& [sub, kind] : subs) {
        if (!sub->parsed()) continue;
        inv.subcommand = kind_name(kind);
        inv.config.kind = kind;
    }
    for (const auto& slot : slots) {
        if (slot->opt->count() == 0) continue;
        inv.flags.emplace_back(slot->name, slot->flag ? "true" : slot->value);
    }
    if (!config_path.empty()) inv.config_file = config_path;

    if (inv.config_file)
        for (const auto& [k, v] : read_config_file(*inv.config_file)) apply_setting(inv.config, k, v);
    if (auto it = env.find("SPLITPERC_SEED"); it != env.end()) apply_setting(inv.config, "seed", it->second);
    if (auto it = env.find("SPLITPERC_THREADS"); it != env.end())
        apply_setting(inv.config, "threads", it->second);
    for (const auto& [k, v] : inv.flags) apply_setting(inv.config, k, v);
    return inv;
}

/// Runs the CLI; returns the process exit code.
inline int parse_and_run(int argc, const char* const* argv, const std::map<std::string, std::string>& env,
                         std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Percolation on random split trees: Monte Carlo experiments", "splitperc"};
    try {
        const CliInvocation inv = parse_invocation(argc, argv, env, app);
        const ExperimentReport rep = run_experiment(inv.config);
        write_report(rep, inv.config.out, inv.config.format);
        out << "report written to " << inv.config.out << '\n';
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const BudgetExceeded& e) {
        err << "budget exceeded: " << e.what() << '\n';
        return exit_budget;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << '\n';
        return exit_failure;
    } catch (...) {
        err << "failure: unknown error\n";
        return exit_failure;
    }
}

/// Copies the variables the CLI reads from the process environment.
inline std::map<std::string, std::string> process_environment() {
    std::map<std::string, std::string> env;
    for (const char* name : {"SPLITPERC_SEED", "SPLITPERC_THREADS"})
        if (const char* v = std::getenv(name)) env[name] = v;
    return env;
}

} // namespace splitperc
