#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "confclust/align.hpp"

using namespace confclust;

namespace {

CostMatrix random_cost(Rng& rng, int K, int max_value) {
    CostMatrix c(K);
    for (int k = 0; k < K; ++k)
        for (int j = 0; j < K; ++j) c(k, j) = static_cast<std::int64_t>(rng.index(static_cast<std::size_t>(max_value) + 1));
    return c;
}

}  // namespace

TEST_CASE("confusion cost examples") {
    const Labeling y({0, 1, 2, 1}, 3);
    const auto same = build_confusion_cost(y, y, 3);
    for (int k = 0; k < 3; ++k) CHECK(same(k, k) == 0);
    CHECK(same.cost(Permutation::identity(3)) == 0);

    const Labeling pred({0, 1, 1, 0}, 2), swapped({1, 0, 0, 1}, 2);
    const auto anti = build_confusion_cost(pred, swapped, 2);
    CHECK(anti(0, 1) == 0);
    CHECK(anti(1, 0) == 0);
    CHECK(anti(0, 0) == 2);

    // clustered: 1 1 2 2 3 3, predicted: 1 2 2 2 3 1 (1-based)
    const Labeling clustered({0, 0, 1, 1, 2, 2}, 3), predicted({0, 1, 1, 1, 2, 0}, 3);
    const auto c = build_confusion_cost(predicted, clustered, 3);
    const std::int64_t expect[3][3] = {{1, 1, 2}, {2, 0, 2}, {1, 2, 1}};
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j) CHECK(c(k, j) == expect[k][j]);
    CHECK(solve_assignment(c) == Permutation::identity(3));

    CHECK_THROWS_AS(build_confusion_cost(Labeling({0}, 2), Labeling({0, 1}, 2), 2), InvalidArgument);
}

TEST_CASE("solve_assignment examples") {
    CHECK(solve_assignment(CostMatrix(2, {0, 5, 5, 0})) == Permutation::identity(2));
    CHECK(solve_assignment(CostMatrix(2, {5, 0, 0, 5})) == Permutation(std::vector<int>{1, 0}));
    CHECK(brute_force_assignment(CostMatrix(1, {7})) == Permutation::identity(1));
    CHECK(solve_assignment(CostMatrix(4)) == Permutation::identity(4));
    CHECK(brute_force_assignment(CostMatrix(4)) == Permutation::identity(4));
    CHECK_THROWS_AS(brute_force_assignment(CostMatrix(9)), UnsupportedSize);
}

TEST_CASE("Hungarian agrees with exhaustive search, ties included") {
    Rng rng({1, 0});
    for (int t = 0; t < 1000; ++t) {
        const int K = 4;
        const auto c = random_cost(rng, K, t % 2 == 0 ? 3 : 50);
        const auto h = solve_assignment(c);
        const auto b = brute_force_assignment(c);
        CHECK(c.cost(h) == c.cost(b));
        CHECK(h == b);
    }
    for (int t = 0; t < 200; ++t) {
        const auto c = random_cost(rng, 5, 9);
        CHECK(solve_assignment(c) == brute_force_assignment(c));
    }
}

TEST_CASE("row shifts do not change the optimal assignment") {
    Rng rng({2, 0});
    for (int t = 0; t < 200; ++t) {
        auto c = random_cost(rng, 5, 20);
        const auto before = solve_assignment(c);
        const std::int64_t old_cost = c.cost(before);
        const int row = static_cast<int>(rng.index(5));
        const std::int64_t shift = static_cast<std::int64_t>(rng.index(100));
        for (int j = 0; j < 5; ++j) c(row, j) += shift;
        const auto after = solve_assignment(c);
        CHECK(after == before);
        CHECK(c.cost(after) == old_cost + shift);
    }
}

TEST_CASE("real-valued assignment finds the optimum") {
    Rng rng({3, 0});
    for (int t = 0; t < 100; ++t) {
        Matrix c(4, 4);
        for (int k = 0; k < 4; ++k)
            for (int j = 0; j < 4; ++j) c(k, j) = rng.uniform();
        const auto got = solve_assignment_real(c);
        std::vector<int> perm{0, 1, 2, 3};
        double best = 1e300;
        do {
            double s = 0.0;
            for (int k = 0; k < 4; ++k) s += c(k, perm[static_cast<std::size_t>(k)]);
            best = std::min(best, s);
        } while (std::next_permutation(perm.begin(), perm.end()));
        double s = 0.0;
        for (int k = 0; k < 4; ++k) s += c(k, got(k));
        CHECK(s == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("Permutation basics") {
    const Permutation p(std::vector<int>{2, 0, 1});
    CHECK(p.inverse()(2) == 0);
    CHECK(p.apply(Labeling({0, 1, 2}, 3)).labels() == std::vector<int>{2, 0, 1});
    CHECK_THROWS_AS(Permutation(std::vector<int>{0, 0}), InvalidArgument);
}
