#include <catch2/catch_amalgamated.hpp>

#include "splitperc/harness.hpp"
#include "splitperc/stats.hpp"
#include "splitperc/treegen.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

using namespace splitperc;

namespace {

// Checks every structural invariant of a built tree.
void check_structure(const SplitTree& tree) {
    const SplitParams& p = tree.params;
    std::int64_t held_total = 0;
    REQUIRE(tree.parent[0] == kNoVertex);
    REQUIRE(tree.depth[0] == 0);
    REQUIRE(tree.subtree_balls[0] == tree.n);
    for (std::size_t u = 0; u < tree.size(); ++u) {
        const auto uid = VertexId(u);
        REQUIRE(tree.subtree_balls[u] > 0);
        held_total += tree.held[u];
        std::int64_t below = 0;
        for (VertexId v : tree.children(uid)) {
            REQUIRE(tree.parent[std::size_t(v)] == uid);
            REQUIRE(tree.depth[std::size_t(v)] == tree.depth[u] + 1);
            below += tree.subtree_balls[std::size_t(v)];
        }
        REQUIRE(tree.subtree_balls[u] == tree.held[u] + below);
        if (tree.is_leaf(uid)) {
            REQUIRE(tree.held[u] >= 1);
            REQUIRE(tree.held[u] <= p.s);
        } else {
            REQUIRE(tree.held[u] == p.s0);
        }
    }
    REQUIRE(held_total == tree.n);
}

double harmonic(std::int64_t n) {
    double h = 0.0;
    for (std::int64_t k = n; k >= 1; --k) h += 1.0 / double(k);
    return h;
}

} // namespace

TEST_CASE("small bst trees are forced", "[treegen]") {
    for (auto mode : {BuildMode::recursive_multinomial, BuildMode::ball_by_ball}) {
        const auto one = build_tree(bst_params(), 1, 3, {mode});
        REQUIRE(one.size() == 1);
        CHECK(one.held[0] == 1);
        const auto st1 = tree_stats(one);
        CHECK(st1.vertex_count == 1);
        CHECK(st1.ball_path_length == 0);

        const auto two = build_tree(bst_params(), 2, 3, {mode});
        const auto st2 = tree_stats(two);
        CHECK(st2.vertex_count == 2);
        CHECK(st2.ball_path_length == 1);
        CHECK(st2.vertex_path_length == 1);
        CHECK(st2.height == 1);
        CHECK(two.held[0] == 1);
    }
    CHECK_THROWS_AS(build_tree(bst_params(), 0, 1), ValidationError);
    CHECK_THROWS_AS(build_tree(bst_params(), kMaxBalls + 1, 1), BudgetExceeded);
}

TEST_CASE("built trees satisfy the structural invariants", "[treegen]") {
    const std::vector<SplitParams> presets{
        bst_params(),
        trie_params(Deterministic{2}),
        trie_params(Spacings{3}),
        make_params(Spacings{3}, 2, 0, 1),
        make_params(Dirichlet{4, 0.7}, 5, 2, 1),
        make_params(BinarySearch{}, 3, 1, 1),
    };
    std::uint64_t seed = 1;
    for (const auto& p : presets) {
        for (std::int64_t n : {1, 2, 3, 17, 1000, 40000}) {
            for (auto mode : {BuildMode::recursive_multinomial, BuildMode::ball_by_ball}) {
                if (mode == BuildMode::ball_by_ball && n > 1000) continue;
                INFO(family_name(p.family) << " s=" << p.s << " s0=" << p.s0 << " s1=" << p.s1 << " n=" << n);
                const auto tree = build_tree(p, n, seed++, {mode, true});
                check_structure(tree);
                const auto st = tree_stats(tree);
                std::int64_t psi = 0, ups = 0;
                for (std::size_t u = 0; u < tree.size(); ++u) {
                    psi += std::int64_t(tree.held[u]) * tree.depth[u];
                    ups += tree.depth[u];
                }
                CHECK(st.ball_path_length == psi);
                CHECK(st.vertex_path_length == ups);
                if (std::holds_alternative<BinarySearch>(p.family) && p.s == 1)
                    CHECK(st.vertex_count == n);
            }
        }
    }
}

TEST_CASE("deterministic trie splits evenly", "[treegen]") {
    // With V = (1/2, 1/2) subtree counts are still binomial, but nhat is n 2^-d.
    const auto tree = build_tree(trie_params(Deterministic{2}), 4096, 2, {BuildMode::recursive_multinomial, true});
    for (std::size_t u = 0; u < tree.size(); ++u)
        CHECK(tree.path_product[u] == std::ldexp(4096.0, -tree.depth[u]));
}

TEST_CASE("both construction modes give the same law at small n", "[treegen][oracle]") {
    const int reps = 10000;
    for (std::int64_t n : {20, 50}) {
        std::vector<std::int64_t> n_a, n_b, h_a, h_b;
        std::vector<double> psi_a, psi_b;
        for (int r = 0; r < reps; ++r) {
            const auto a = tree_stats(build_tree(trie_params(Spacings{3}), n, derive_seed(9, 0, r)));
            const auto b = tree_stats(
                build_tree(trie_params(Spacings{3}), n, derive_seed(9, 1, r), {BuildMode::ball_by_ball}));
            n_a.push_back(a.vertex_count);
            n_b.push_back(b.vertex_count);
            h_a.push_back(a.height);
            h_b.push_back(b.height);
            psi_a.push_back(double(a.ball_path_length));
            psi_b.push_back(double(b.ball_path_length));
        }
        INFO("n=" << n);
        CHECK(chi_square_homogeneity(n_a, n_b).p_value > 0.01);
        CHECK(chi_square_homogeneity(h_a, h_b).p_value > 0.01);
        CHECK(ks_two_sample(psi_a, psi_b).p_value > 0.01);
    }
}

TEST_CASE("bst path length matches 2 ln n + 2 gamma - 4 per ball", "[treegen][slow]") {
    const std::int64_t n = 1 << 16;
    Summary psi;
    for (int r = 0; r < 2000; ++r)
        psi.push(double(tree_stats(build_tree(bst_params(), n, derive_seed(17, 0, r))).ball_path_length) / double(n));
    const double target = 2.0 * std::log(double(n)) + 2.0 * std::numbers::egamma - 4.0;
    CHECK(std::abs(psi.mean - target) <= 0.01 * target);
    // Exact mean of the bst path length: 2(n+1)H_n - 4n.
    const double exact = (2.0 * double(n + 1) * harmonic(n) - 4.0 * double(n)) / double(n);
    CHECK(std::abs(psi.mean - exact) <= 4.0 * psi.stderr_mean());
}

TEST_CASE("subtree profile", "[treegen]") {
    const std::int64_t n = 1 << 20;
    const auto tree = build_tree(bst_params(), n, 5, {BuildMode::recursive_multinomial, true});
    const auto st = tree_stats(tree);

    const auto root = subtree_profile(tree, 0);
    REQUIRE(root.size() == 1);
    CHECK(root[0].vertex == 0);
    CHECK(root[0].balls == n);
    CHECK(root[0].nhat == double(n));
    CHECK(subtree_profile(tree, st.height + 1).empty());
    CHECK_THROWS_AS(subtree_profile(tree, -1), ValidationError);

    const auto k = std::int32_t(std::floor(2.0 * std::log2(std::log(double(n)))));
    for (std::int32_t depth = 0; depth <= k; ++depth) {
        std::int64_t total = 0;
        for (const auto& e : subtree_profile(tree, depth)) total += e.balls;
        CHECK(total <= n);
        CHECK(double(n - total) < std::max(tree.params.s, tree.params.s0) * std::ldexp(1.0, depth + 1));
    }

    // Concentration of n_v around the path product at depth k.
    const auto prof = subtree_profile(tree, k);
    const double gap = std::pow(double(n), 0.6);
    std::int64_t far = 0;
    for (const auto& e : prof)
        if (std::abs(double(e.balls) - e.nhat) > gap) ++far;
    CHECK(double(far) / double(prof.size()) <= 5.0 * std::pow(double(n), -0.19));

    const auto bare = build_tree(bst_params(), 100, 5);
    CHECK(std::isnan(subtree_profile(bare, 1)[0].nhat));
}

TEST_CASE("deficit bound holds across sampled trees", "[treegen]") {
    const auto p = make_params(Spacings{3}, 4, 2, 1);
    for (int r = 0; r < 30; ++r) {
        const auto tree = build_tree(p, 50000, derive_seed(3, 0, r));
        const auto height = tree_stats(tree).height;
        for (std::int32_t k = 0; k <= std::min(height, 8); ++k) {
            std::int64_t total = 0;
            for (const auto& e : subtree_profile(tree, k)) total += e.balls;
            REQUIRE(double(tree.n - total) < std::max(p.s, p.s0) * std::pow(3.0, k + 1));
        }
    }
}

TEST_CASE("ball depths and last common ancestors", "[treegen]") {
    Rng rng(8);
    const auto single = build_tree(bst_params(), 1, 1);
    for (int i = 0; i < 10; ++i) {
        CHECK(sample_ball_depth(single, rng) == 0);
        CHECK(lca_depth(single, rng) == 0);
    }

    const auto tree = build_tree(make_params(Spacings{3}, 2, 1, 0), 5000, 3);
    const BallPicker picker(tree);
    std::vector<std::int64_t> seen(tree.size(), 0);
    for (int i = 0; i < 200000; ++i) ++seen[std::size_t(picker.pick(rng))];
    // Vertex frequencies follow the held counts.
    std::int64_t chi_bins = 0;
    double chi = 0.0;
    for (std::size_t u = 0; u < tree.size(); ++u) {
        const double expected = 200000.0 * tree.held[u] / double(tree.n);
        if (tree.held[u] == 0) {
            REQUIRE(seen[u] == 0);
            continue;
        }
        chi += (double(seen[u]) - expected) * (double(seen[u]) - expected) / expected;
        ++chi_bins;
    }
    CHECK(boost::math::gamma_q(0.5 * double(chi_bins - 1), 0.5 * chi) > 1e-4);

    for (int i = 0; i < 2000; ++i) {
        const auto pair = sample_ball_pair(tree, picker, rng);
        const auto d1 = tree.depth[std::size_t(pair.first)];
        const auto d2 = tree.depth[std::size_t(pair.second)];
        REQUIRE(pair.lca_depth <= std::min(d1, d2));
        const VertexId a = last_common_ancestor(tree, pair.first, pair.second);
        REQUIRE(tree.depth[std::size_t(a)] == pair.lca_depth);
        REQUIRE(spanning_edges(tree, pair.first, pair.second) == d1 + d2 - pair.lca_depth);
    }
}

TEST_CASE("lca depth over ln ln n shrinks with n", "[treegen][slow]") {
    std::vector<double> ratios;
    for (std::int64_t n : {std::int64_t(1) << 12, std::int64_t(1) << 16, std::int64_t(1) << 20}) {
        std::vector<double> lca;
        Rng rng(derive_seed(31, std::uint64_t(n)));
        for (int r = 0; r < 40; ++r) {
            const auto tree = build_tree(bst_params(), n, rng);
            const BallPicker picker(tree);
            for (int i = 0; i < 500; ++i) lca.push_back(sample_ball_pair(tree, picker, rng).lca_depth);
        }
        ratios.push_back(sample_median(lca) / std::log(std::log(double(n))));
    }
    CHECK(ratios[1] < ratios[0]);
    CHECK(ratios[2] < ratios[1]);
}

TEST_CASE("height stays of order ln n", "[treegen]") {
    std::vector<double> worst;
    for (std::int64_t n : {std::int64_t(1) << 12, std::int64_t(1) << 16, std::int64_t(1) << 20}) {
        double w = 0.0;
        for (int r = 0; r < (n > 100000 ? 10 : 100); ++r)
            w = std::max(w, tree_stats(build_tree(bst_params(), n, derive_seed(41, 0, r))).height /
                                std::log(double(n)));
        worst.push_back(w);
    }
    // The bst height constant is 4.311; ratios stay below it plus a small-n margin.
    for (double w : worst) CHECK(w < 6.0);
    CHECK(worst[2] < worst[0] + 0.5);
}

TEST_CASE("tree dump lists one record per vertex", "[treegen]") {
    const auto tree = build_tree(bst_params(), 5, 1);
    std::ostringstream os;
    dump_tree(tree, os);
    std::istringstream is(os.str());
    std::string line;
    std::size_t lines = 0;
    while (std::getline(is, line)) ++lines;
    CHECK(lines == tree.size());
}
