#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include <doctest.h>

#include "attribroi/errors.hpp"
#include "attribroi/xai.hpp"

using namespace attribroi;

namespace {

std::size_t mask_of(const std::vector<bool>& coalition) {
    std::size_t m = 0;
    for (std::size_t i = 0; i < coalition.size(); ++i) {
        if (coalition[i]) m |= std::size_t{1} << i;
    }
    return m;
}

// random characteristic function as a lookup table over coalition masks
std::vector<double> random_game_table(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> table(std::size_t{1} << n);
    for (double& v : table) v = dist(rng);
    return table;
}

CoalitionValue table_game(const std::vector<double>& table) {
    return [&table](const std::vector<bool>& coalition) { return table[mask_of(coalition)]; };
}

// independent oracle: average marginal contribution over every one of the n!
// player orderings, enumerated outright
std::vector<double> shapley_by_permutations(std::size_t n, const CoalitionValue& value) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> phi(n, 0.0);
    std::size_t count = 0;
    do {
        std::vector<bool> coalition(n, false);
        double prev = value(coalition);
        for (std::size_t player : order) {
            coalition[player] = true;
            const double cur = value(coalition);
            phi[player] += cur - prev;
            prev = cur;
        }
        ++count;
    } while (std::next_permutation(order.begin(), order.end()));
    for (double& v : phi) v /= static_cast<double>(count);
    return phi;
}

}  // namespace

TEST_CASE("exact solver agrees with full permutation enumeration") {
    for (std::size_t n = 3; n <= 8; ++n) {
        CAPTURE(n);
        const auto table = random_game_table(n, 1000 + n);
        const auto game = table_game(table);
        const ShapleyResult got = shapley_exact(n, game);
        const std::vector<double> want = shapley_by_permutations(n, game);
        REQUIRE(got.phi.size() == n);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(got.phi[i] - want[i]) < 1e-10);
        }
        CHECK(got.std_err.empty());
    }
}

TEST_CASE("exact shapley values satisfy efficiency") {
    for (std::size_t n : {2, 5, 9}) {
        const auto table = random_game_table(n, 2000 + n);
        const ShapleyResult r = shapley_exact(n, table_game(table));
        const double total = std::accumulate(r.phi.begin(), r.phi.end(), 0.0);
        CHECK(std::abs(total - (r.v_full - r.v_empty)) < 1e-9);
        CHECK(r.v_empty == table[0]);
        CHECK(r.v_full == table[table.size() - 1]);
    }
}

TEST_CASE("a dummy player receives exactly its solo contribution") {
    const auto base = random_game_table(5, 77);
    // player 0 always adds 0.25 and otherwise changes nothing
    const CoalitionValue game = [&](const std::vector<bool>& coalition) {
        std::vector<bool> rest = coalition;
        rest[0] = false;
        return base[mask_of(rest)] + (coalition[0] ? 0.25 : 0.0);
    };
    const ShapleyResult r = shapley_exact(5, game);
    CHECK(std::abs(r.phi[0] - 0.25) < 1e-12);
}

TEST_CASE("interchangeable players receive equal shares") {
    // value depends only on |S| and on whether {1,2} are jointly present
    const CoalitionValue game = [](const std::vector<bool>& coalition) {
        int size = 0;
        for (bool b : coalition) size += b;
        const double bonus = (coalition[1] && coalition[2]) ? 0.5 : 0.0;
        return 0.3 * size + bonus;
    };
    const ShapleyResult r = shapley_exact(4, game);
    CHECK(std::abs(r.phi[1] - r.phi[2]) < 1e-12);
    CHECK(std::abs(r.phi[0] - r.phi[3]) < 1e-12);
}

TEST_CASE("the solver is linear in the game") {
    const std::size_t n = 6;
    const auto tv = random_game_table(n, 31);
    const auto tw = random_game_table(n, 37);
    std::vector<double> combo(tv.size());
    for (std::size_t m = 0; m < tv.size(); ++m) combo[m] = 2.0 * tv[m] + tw[m];

    const ShapleyResult rv = shapley_exact(n, table_game(tv));
    const ShapleyResult rw = shapley_exact(n, table_game(tw));
    const ShapleyResult rc = shapley_exact(n, table_game(combo));
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(std::abs(rc.phi[i] - (2.0 * rv.phi[i] + rw.phi[i])) < 1e-12);
    }
}

TEST_CASE("three-player game solved by hand") {
    // masks: bit i = player i in the coalition
    const std::vector<double> table = {0, 1, 2, 4, 3, 5, 6, 8};
    const ShapleyResult r = shapley_exact(3, table_game(table));
    CHECK(r.phi[0] == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
    CHECK(r.phi[1] == doctest::Approx(8.0 / 3.0).epsilon(1e-12));
    CHECK(r.phi[2] == doctest::Approx(11.0 / 3.0).epsilon(1e-12));
    CHECK(r.v_empty == 0.0);
    CHECK(r.v_full == 8.0);
}

TEST_CASE("single-player game gives the lone marginal") {
    const std::vector<double> table = {0.4, 0.9};
    const ShapleyResult r = shapley_exact(1, table_game(table));
    CHECK(r.phi[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("an additive game is recovered exactly, with zero sampling error") {
    const std::vector<double> w = {0.3, -0.1, 0.7, 0.2};
    const CoalitionValue game = [&](const std::vector<bool>& coalition) {
        double total = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (coalition[i]) total += w[i];
        }
        return total;
    };
    const ShapleyResult exact = shapley_exact(4, game);
    const ShapleyResult sampled = shapley_sampled(4, game, 16, 5);
    for (std::size_t i = 0; i < w.size(); ++i) {
        CHECK(std::abs(exact.phi[i] - w[i]) < 1e-12);
        CHECK(std::abs(sampled.phi[i] - w[i]) < 1e-12);
        CHECK(sampled.std_err[i] < 1e-12);
    }
}

TEST_CASE("player-count limits are enforced") {
    const CoalitionValue zero = [](const std::vector<bool>&) { return 0.0; };
    CHECK_THROWS_AS(shapley_exact(0, zero), ContractError);
    CHECK_THROWS_AS(shapley_exact(21, zero), ConfigError);
    CHECK_THROWS_AS(shapley_sampled(0, zero, 100, 0), ContractError);
}

TEST_CASE("sampled mode rejects budgets below two passes") {
    const auto table = random_game_table(4, 3);
    CHECK_THROWS_AS(shapley_sampled(4, table_game(table), 7, 0), ConfigError);
    try {
        shapley_sampled(4, table_game(table), 7, 0);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("below 2n") != std::string::npos);
    }
}

TEST_CASE("sampled efficiency holds by telescoping at any budget") {
    const auto table = random_game_table(7, 11);
    for (std::size_t budget : {14u, 35u, 70u}) {
        const ShapleyResult r = shapley_sampled(7, table_game(table), budget, 21);
        const double total = std::accumulate(r.phi.begin(), r.phi.end(), 0.0);
        CHECK(std::abs(total - (r.v_full - r.v_empty)) < 1e-12);
        CHECK(r.std_err.size() == 7);
        for (double se : r.std_err) CHECK(se >= 0.0);
    }
}

TEST_CASE("sampling error shrinks as the budget grows") {
    const std::size_t n = 8;
    const auto table = random_game_table(n, 4242);
    const auto game = table_game(table);
    const ShapleyResult exact = shapley_exact(n, game);

    auto mean_abs_dev = [&](std::size_t budget) {
        double total = 0.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const ShapleyResult r = shapley_sampled(n, game, budget, seed);
            for (std::size_t i = 0; i < n; ++i) total += std::abs(r.phi[i] - exact.phi[i]);
        }
        return total / (5.0 * double(n));
    };

    const double coarse = mean_abs_dev(2 * n);
    const double mid = mean_abs_dev(8 * n);
    const double fine = mean_abs_dev(32 * n);
    CAPTURE(coarse);
    CAPTURE(mid);
    CAPTURE(fine);
    CHECK(mid < coarse);
    CHECK(fine < mid);
}

TEST_CASE("sampling is deterministic per seed") {
    const auto table = random_game_table(6, 5150);
    const auto game = table_game(table);
    const ShapleyResult a = shapley_sampled(6, game, 60, 9);
    const ShapleyResult b = shapley_sampled(6, game, 60, 9);
    CHECK(a.phi == b.phi);
    CHECK(a.std_err == b.std_err);

    const ShapleyResult c = shapley_sampled(6, game, 60, 10);
    bool differs = false;
    for (std::size_t i = 0; i < 6; ++i) {
        if (a.phi[i] != c.phi[i]) differs = true;
    }
    CHECK(differs);
}

TEST_CASE("antithetic permutations cancel position bias in symmetric games") {
    // pure positional game: the k-th player added contributes k+1, so every
    // player's true value is (n+1)/2
    const std::size_t n = 6;
    const CoalitionValue game = [](const std::vector<bool>& coalition) {
        int size = 0;
        for (bool b : coalition) size += b;
        return 0.5 * double(size) * double(size + 1);
    };
    // one antithetic pair already nails it: order and reverse average out
    const ShapleyResult r = shapley_sampled(n, game, 2 * n, 3);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(r.phi[i] == doctest::Approx((double(n) + 1.0) / 2.0).epsilon(1e-12));
    }
}
