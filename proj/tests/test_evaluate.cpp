#include <doctest.h>

#include <algorithm>

#include "confclust/evaluate.hpp"

using namespace confclust;

namespace {

std::vector<ConfidenceSet> random_sets(Rng& rng, int n, int K) {
    std::vector<ConfidenceSet> sets;
    for (int i = 0; i < n; ++i) {
        std::vector<int> m;
        for (int k = 0; k < K; ++k)
            if (rng.uniform() < 0.35) m.push_back(k);
        if (m.empty()) m.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(K))));
        sets.emplace_back(m);
    }
    return sets;
}

Labeling random_labels(Rng& rng, int n, int K) {
    std::vector<int> y(static_cast<std::size_t>(n));
    for (auto& v : y) v = static_cast<int>(rng.index(static_cast<std::size_t>(K)));
    return Labeling(y, K);
}

/// Best coverage over all relabelings, first in lexicographic order on ties.
Permutation exhaustive_oracle(const std::vector<ConfidenceSet>& sets, const Labeling& y) {
    std::vector<int> perm(static_cast<std::size_t>(y.K()));
    for (int k = 0; k < y.K(); ++k) perm[static_cast<std::size_t>(k)] = k;
    double best = -1.0;
    Permutation arg;
    do {
        const Permutation p(perm);
        const double c = coverage_under(sets, y, p);
        if (c > best) {
            best = c;
            arg = p;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return arg;
}

SoftLabelMatrix random_soft(Rng& rng, int n, int K) {
    Matrix m(n, K);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < K; ++k) m(i, k) = rng.uniform() < 0.15 ? 0.0 : -std::log(1.0 - rng.uniform());
        if (m.row(i).sum() == 0.0) m(i, 0) = 1.0;
        m.row(i) /= m.row(i).sum();
    }
    return SoftLabelMatrix(m);
}

GeneratorConfig twin_centers() {
    GeneratorConfig g;
    g.centers = Matrix::Zero(2, 2);
    g.sigma2 = 1.0;
    g.weights = ProbVector::uniform(2);
    return g;
}

}  // namespace

TEST_CASE("oracle permutation examples") {
    Rng rng({1, 0});
    const Labeling y = random_labels(rng, 30, 3);
    const std::vector<ConfidenceSet> full(30, ConfidenceSet({0, 1, 2}));
    CHECK(oracle_permutation(full, y) == Permutation::identity(3));

    const Permutation tau(std::vector<int>{2, 0, 1});
    std::vector<ConfidenceSet> exact;
    for (int i = 0; i < y.size(); ++i) exact.emplace_back(std::vector<int>{tau(y[i])});
    CHECK(oracle_permutation(exact, y) == tau);
    CHECK(coverage_report(exact, y).coverage == 1.0);

    CHECK_THROWS_AS(oracle_permutation(std::vector<ConfidenceSet>{}, Labeling()), InvalidArgument);
}

TEST_CASE("oracle permutation matches exhaustive search") {
    Rng rng({2, 0});
    for (int t = 0; t < 200; ++t) {
        const int K = 2 + static_cast<int>(rng.index(5));
        const int n = 20;
        const auto sets = random_sets(rng, n, K);
        const auto y = random_labels(rng, n, K);
        const auto got = oracle_permutation(sets, y);
        CHECK(got == exhaustive_oracle(sets, y));
        CHECK(coverage_under(sets, y, got) >= coverage_under(sets, y, Permutation::identity(K)));
    }
}

TEST_CASE("coverage report on full sets") {
    Rng rng({3, 0});
    const Labeling y = random_labels(rng, 50, 4);
    const std::vector<ConfidenceSet> full(50, ConfidenceSet({0, 1, 2, 3}));
    const auto r = coverage_report(full, y);
    CHECK(r.coverage == 1.0);
    CHECK(r.mean_set_size == 4.0);
    CHECK(r.size_histogram == std::vector<int>{0, 0, 0, 0, 50});
    CHECK(r.n_test == 50);
}

TEST_CASE("distances") {
    const ProbVector a{0.5, 0.5}, b{1.0, 0.0};
    CHECK(l1_distance(a, b) == doctest::Approx(1.0));
    CHECK(hellinger_sq(a, a) == 0.0);
    CHECK(hellinger_sq(b, ProbVector{0.0, 1.0}) == doctest::Approx(1.0));
}

TEST_CASE("product L1 bound") {
    const std::vector<double> one{0.02};
    CHECK(product_l1_bound(one) == doctest::Approx(0.4));
    const std::vector<double> none{0.0, 0.0};
    CHECK(product_l1_bound(none) == 0.0);
    const std::vector<double> big{1.0, 1.0};
    CHECK(product_l1_bound(big) == 2.0);
}

TEST_CASE("exact product L1 never exceeds the Hellinger bound") {
    Rng rng({4, 0});
    for (int t = 0; t < 200; ++t) {
        const int n = 1 + static_cast<int>(rng.index(6));
        const int K = 2 + static_cast<int>(rng.index(2));
        const auto a = random_soft(rng, n, K), b = random_soft(rng, n, K);
        std::vector<double> h2;
        for (int j = 0; j < n; ++j) h2.push_back(hellinger_sq(a.row(j), b.row(j)));
        CHECK(exact_product_l1(a, b) <= product_l1_bound(h2) + 1e-12);
    }
    const auto single_a = random_soft(rng, 1, 3), single_b = random_soft(rng, 1, 3);
    CHECK(exact_product_l1(single_a, single_b) == doctest::Approx(l1_distance(single_a.row(0), single_b.row(0))));
    CHECK_THROWS_AS(exact_product_l1(random_soft(rng, 13, 2), random_soft(rng, 13, 2)), UnsupportedSize);
}

TEST_CASE("component matching undoes a relabeling") {
    Rng rng({5, 0});
    const auto ref = random_soft(rng, 40, 3);
    Matrix shuffled(40, 3);
    shuffled.col(0) = ref.matrix().col(2);
    shuffled.col(1) = ref.matrix().col(0);
    shuffled.col(2) = ref.matrix().col(1);
    CHECK(aligned_l1_gap(SoftLabelMatrix(shuffled), ref) == doctest::Approx(0.0));
}

TEST_CASE("coverage bound arithmetic") {
    CHECK(coverage_bound_rhs(0.1, 0.0, 0.0, 100) == doctest::Approx(0.9));
    CHECK(coverage_bound_rhs(0.1, 0.05, 0.02, 100) == doctest::Approx(0.84118).epsilon(1e-5));
    CHECK(coverage_bound_rhs(0.1, 2.0, 2.0, 100) <= -1.0);
    Rng rng({6, 0});
    for (int t = 0; t < 200; ++t) {
        const double a = 0.5 * rng.uniform(), e = rng.uniform(), s = rng.uniform(), d = 0.1 * rng.uniform() + 1e-3;
        const double base = coverage_bound_rhs(a, e, s, 200);
        CHECK(coverage_bound_rhs(a + d, e, s, 200) < base);
        CHECK(coverage_bound_rhs(a, e + d, s, 200) < base);
        CHECK(coverage_bound_rhs(a, e, s + d, 200) < base);
    }
}

TEST_CASE("a perfect oracle clusterer has zero diagnostics") {
    const auto gen = default_generator(GeneratorFamily::Gaussian, 2, 3, 1.5);
    ClustererSpec oracle;
    oracle.kind = ClustererKind::Fixed;
    oracle.fixed = as_mixture_model(gen);
    const auto r = run_diagnostics(oracle, gen, 50, 5, 0.1, {1, 0});
    CHECK(r.E_hat == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.S_hat_upper == 0.0);
    CHECK(r.bound_rhs == doctest::Approx(0.9));
}

TEST_CASE("one-hot labels on an even posterior have unit estimation error") {
    const auto gen = twin_centers();
    ClustererSpec onehot;
    onehot.kind = ClustererKind::Fixed;
    onehot.fixed = as_mixture_model(gen);
    onehot.one_hot = true;
    const auto e = estimate_estimation_error(onehot, gen, 40, 3, {2, 0});
    CHECK(e.mean == doctest::Approx(1.0));
}

TEST_CASE("replace-one stability is zero when the replacement equals the original") {
    const auto gen = default_generator(GeneratorFamily::Gaussian, 2, 3, 1.5);
    const auto sim = generate_mixture_data(gen, 60, {3, 0});
    ClustererSpec spec;
    const auto inst = replace_one_stability(spec, 3, sim.X, sim.X.row(0), {4, 0});
    CHECK(inst.bound == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(inst.hellinger_sq.size() == 59);
}

TEST_CASE("diagnostics are bounded and finite") {
    const auto gen = default_generator(GeneratorFamily::Gaussian, 2, 3, 1.5);
    const auto r = run_diagnostics({}, gen, 100, 4, 0.1, {5, 0});
    CHECK(r.E_hat >= 0.0);
    CHECK(r.E_hat <= 2.0);
    CHECK(r.S_hat_upper >= 0.0);
    CHECK(r.S_hat_upper <= 2.0);
    CHECK(std::isfinite(r.bound_rhs));
    CHECK(r.failures == 0);
}
