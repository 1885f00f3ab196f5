#include <catch2/catch_amalgamated.hpp>

#include "splitperc/renewal.hpp"
#include "splitperc/stats.hpp"

#include <cmath>
#include <vector>

using namespace splitperc;
using Catch::Approx;

TEST_CASE("exploration edge cases", "[renewal]") {
    CHECK(explore_count(BinarySearch{}, -0.5, std::uint64_t(1)).count == 0);
    CHECK(explore_count(Deterministic{2}, 2.0 * std::log(2.0), std::uint64_t(1)).count == 6);
    CHECK(explore_count(Deterministic{3}, 3.0 * std::log(3.0), std::uint64_t(1)).count == 3 + 9 + 27);
    CHECK(explore_count(Deterministic{2}, 0.5, std::uint64_t(1)).count == 0);
    for (int b : {2, 3, 5})
        for (double z : {0.0, 1.0, 4.0, 7.5})
            CHECK(double(explore_count(Deterministic{b}, z, std::uint64_t(9)).count) == deterministic_renewal(b, z));

    const auto capped = explore_count(BinarySearch{}, 20.0, std::uint64_t(1), 1000);
    CHECK(capped.budget_exceeded);
}

TEST_CASE("counts are nested in z under shared randomness", "[renewal]") {
    for (int r = 0; r < 50; ++r) {
        std::int64_t prev = -1;
        for (double z : {0.5, 1.0, 2.0, 3.5, 5.0}) {
            const auto c = explore_count(Spacings{3}, z, derive_seed(2, 0, r)).count;
            CHECK(c >= prev);
            prev = c;
        }
    }
}

TEST_CASE("mean count matches the renewal sum", "[renewal]") {
    // bst: -ln V is Exp(1), so E N(z) = sum_k 2^k P(Poisson(z) >= k) = 2 e^z - 2.
    const double z = 2.0;
    const double exact = 2.0 * std::exp(z) - 2.0;
    Summary s;
    for (int r = 0; r < 20000; ++r) s.push(double(explore_count(BinarySearch{}, z, derive_seed(4, 0, r)).count));
    CHECK(std::abs(s.mean - exact) <= 4.0 * s.stderr_mean());
}

TEST_CASE("first-order renewal asymptotics", "[renewal][slow]") {
    Summary s;
    for (int r = 0; r < 200; ++r) s.push(double(explore_count(BinarySearch{}, 8.0, derive_seed(5, 0, r)).count));
    CHECK(s.mean == Approx(2.0 * std::exp(8.0)).epsilon(0.05));
}

TEST_CASE("renewal profile", "[renewal][slow]") {
    std::vector<double> grid;
    for (double z = 0.0; z <= 8.0 + 1e-9; z += 0.25) grid.push_back(z);
    const auto prof = renewal_profile(BinarySearch{}, grid, 500, 6);
    REQUIRE(prof.mean.size() == grid.size());
    CHECK(prof.failures == 0);
    CHECK(prof.replicas_used == 500);
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(prof.mean[i] >= prof.mean[i - 1]);
    CHECK(prof.integral_trapezoid == Approx(-2.0).margin(0.3));
    CHECK(prof.integral_exact == Approx(-2.0).margin(0.3));

    const auto det = renewal_profile(Deterministic{2}, grid, 3, 1);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(det.mean[i] == deterministic_renewal(2, grid[i]));
        CHECK(det.stderr_mean[i] == 0.0);
    }

    CHECK_THROWS_AS(renewal_profile(BinarySearch{}, {}, 3, 1), ValidationError);
    CHECK_THROWS_AS(renewal_profile(BinarySearch{}, {1.0, 0.5}, 3, 1), ValidationError);
    CHECK_THROWS_AS(renewal_profile(BinarySearch{}, {-1.0, 0.5}, 3, 1), ValidationError);
}

TEST_CASE("per-replica counts are monotone on the grid", "[renewal]") {
    const std::vector<double> grid{0.0, 0.5, 1.0, 2.0, 4.0};
    Rng rng(3);
    for (int r = 0; r < 100; ++r) {
        const auto rep = renewal_replica(Dirichlet{3, 0.5}, family_constants(Dirichlet{3, 0.5}).mu, grid, rng);
        REQUIRE_FALSE(rep.failed);
        for (std::size_t i = 1; i < grid.size(); ++i) REQUIRE(rep.counts[i] >= rep.counts[i - 1]);
    }
    const auto failed = renewal_replica(BinarySearch{}, 0.5, {0.0, 30.0}, rng, 100);
    CHECK(failed.failed);
}
