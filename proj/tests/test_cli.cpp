#include <catch2/catch_amalgamated.hpp>

#include "splitperc/cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace splitperc;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args, const std::map<std::string, std::string>& env = {}) {
    args.insert(args.begin(), "splitperc");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = parse_and_run(int(argv.size()), argv.data(), env, out, err);
    return {code, out.str(), err.str()};
}

CliInvocation invoke(std::vector<std::string> args, const std::map<std::string, std::string>& env = {}) {
    args.insert(args.begin(), "splitperc");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    CLI::App app;
    return parse_invocation(int(argv.size()), argv.data(), env, app);
}

fs::path temp_path(const std::string& name) { return fs::temp_directory_path() / ("splitperc_test_" + name); }

} // namespace

TEST_CASE("smoke run writes a report", "[cli]") {
    const auto path = temp_path("smoke.json");
    fs::remove(path);
    const auto r = run({"lln", "--family", "bst", "--n", "65536", "--c", "1", "--reps", "10", "--seed", "1",
                        "--out", path.string()});
    CHECK(r.code == 0);
    CHECK(r.out.find(path.string()) != std::string::npos);
    REQUIRE(fs::exists(path));
    std::ifstream f(path);
    const auto j = Json::parse(f);
    CHECK(j["config"]["seed"] == 1);
    CHECK(j["per_n"][0]["n"] == 65536);
    fs::remove(path);
}

TEST_CASE("exit codes", "[cli]") {
    const auto out = temp_path("codes.json").string();
    CHECK(run({"fluct", "--n", "8", "--out", out}).code == exit_usage);
    const auto bad = run({"lln", "--family", "bst", "--s0", "2", "--s", "1", "--out", out});
    CHECK(bad.code == exit_usage);
    CHECK(bad.err.find("s0 <= s") != std::string::npos);
    CHECK(run({"frobnicate"}).code == exit_usage);
    CHECK(run({"lln", "--frobnicate", "3"}).code == exit_usage);
    CHECK(run({}).code == exit_usage);
    CHECK(run({"lln", "--reps", "ten"}).code == exit_usage);
    CHECK(run({"regular", "--h", "40", "--traverse", "--out", out}).code == exit_budget);
    CHECK(run({"lln", "--n", "100", "--out", "/nonexistent-dir/x.json"}).code == exit_usage);
    fs::remove(out);
}

TEST_CASE("help lists every flag", "[cli]") {
    for (const char* sub : {"lln", "fluct", "identity", "regular", "renewal", "depth", "levy_tail"}) {
        const auto r = run({sub, "--help"});
        CHECK(r.code == 0);
        for (const auto& spec : detail::flag_specs())
            CHECK(r.out.find(std::string("--") + spec.name) != std::string::npos);
        CHECK(r.out.find("--config") != std::string::npos);
    }
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("settings precedence: file, then environment, then flags", "[cli]") {
    const auto cfg_path = temp_path("settings.cfg");
    {
        std::ofstream f(cfg_path);
        f << "# experiment settings\n"
             "family = spacings:3\n"
             "n = 1024, 4096\n"
             "seed = 5\n"
             "threads = 2\n"
             "emit-samples = true\n"
             "reps = 7   # trailing comment\n";
    }
    auto inv = invoke({"depth", "--config", cfg_path.string()});
    CHECK(inv.subcommand == "depth");
    CHECK(inv.config.kind == ExperimentKind::depth);
    CHECK(inv.config.family == "spacings:3");
    CHECK(inv.config.n == std::vector<std::int64_t>{1024, 4096});
    CHECK(inv.config.seed == 5);
    CHECK(inv.config.replicas == 7);
    CHECK(inv.config.emit_samples);

    inv = invoke({"depth", "--config", cfg_path.string()}, {{"SPLITPERC_SEED", "9"}, {"SPLITPERC_THREADS", "3"}});
    CHECK(inv.config.seed == 9);
    CHECK(inv.config.threads == 3);

    inv = invoke({"depth", "--config", cfg_path.string(), "--seed", "11", "--reps", "3"},
                 {{"SPLITPERC_SEED", "9"}});
    CHECK(inv.config.seed == 11);
    CHECK(inv.config.replicas == 3);
    CHECK(inv.config.threads == 2);

    CHECK(run({"lln", "--config", temp_path("missing.cfg").string()}).code == exit_usage);
    CHECK(run({"lln", "--n", "1024"}, {{"SPLITPERC_THREADS", "many"}}).code == exit_usage);
    fs::remove(cfg_path);
}

TEST_CASE("config text parsing", "[cli]") {
    const auto kv = parse_config_text("a = 1\n\n  # nothing\nz_step=0.5\r\n");
    REQUIRE(kv.size() == 2);
    CHECK(kv[1].first == "z_step");
    CHECK(kv[1].second == "0.5");
    CHECK_THROWS_AS(parse_config_text("just words"), ValidationError);

    ExperimentConfig cfg;
    apply_setting(cfg, "z-step", "0.5");
    CHECK(cfg.z_step == 0.5);
    apply_setting(cfg, "format", "csv");
    CHECK(cfg.format == ReportFormat::csv);
    CHECK_THROWS_AS(apply_setting(cfg, "format", "xml"), ValidationError);
    CHECK_THROWS_AS(apply_setting(cfg, "nonsense", "1"), ValidationError);
    CHECK_THROWS_AS(apply_setting(cfg, "c", "1.0x"), ValidationError);
    CHECK_THROWS_AS(apply_setting(cfg, "seed", "-3"), ValidationError);
}

TEST_CASE("parsing is total on arbitrary input", "[cli]") {
    Rng rng(1);
    const std::vector<std::string> pieces{"lln", "fluct", "--n", "--c", "--reps", "--seed", "--family", "bst",
                                          "-1", "0", "1e400", "nan", "", "--", "=", "--out", "--format",
                                          "spacings:", "dirichlet:2:-1", "--config", "--timing", "\xff\xfe"};
    for (int i = 0; i < 300; ++i) {
        std::vector<std::string> args;
        const int len = int(rng.uniform01() * 6);
        for (int k = 0; k < len; ++k) {
            if (rng.uniform01() < 0.2) {
                std::string junk;
                for (int c = 0; c < 4; ++c) junk.push_back(char(rng.uniform01() * 256));
                args.push_back(junk);
            } else {
                args.push_back(pieces[std::size_t(rng.uniform01() * double(pieces.size()))]);
            }
        }
        // Keep runs cheap and away from the default report path.
        args.insert(args.end(), {"--reps", "2", "--n", "64", "--out", temp_path("fuzz.json").string()});
        const auto r = run(args);
        CHECK((r.code >= 0 && r.code <= 3));
    }
    fs::remove(temp_path("fuzz.json"));
}
