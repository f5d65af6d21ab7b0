#include "confclust/evaluate.hpp"

#include <cmath>
#include <numeric>

namespace confclust {

double coverage_under(std::span<const ConfidenceSet> sets, const Labeling& truth, const Permutation& perm) {
    if (sets.size() != static_cast<std::size_t>(truth.size())) throw InvalidArgument("coverage_under: length mismatch");
    if (sets.empty()) throw InvalidArgument("coverage_under: empty test set");
    int hit = 0;
    for (int i = 0; i < truth.size(); ++i) hit += sets[static_cast<std::size_t>(i)].contains(perm(truth[i]));
    return static_cast<double>(hit) / truth.size();
}

Permutation oracle_permutation(std::span<const ConfidenceSet> sets, const Labeling& truth) {
    if (sets.size() != static_cast<std::size_t>(truth.size()))
        throw InvalidArgument("oracle_permutation: length mismatch");
    if (sets.empty()) throw InvalidArgument("oracle_permutation: empty test set");
    const int K = truth.K();
    // cost(k, j) = truth-k points left uncovered when k is renamed j
    CostMatrix C(K);
    std::vector<std::int64_t> count(static_cast<std::size_t>(K), 0);
    for (int i = 0; i < truth.size(); ++i) {
        ++count[static_cast<std::size_t>(truth[i])];
        for (int j : sets[static_cast<std::size_t>(i)].members()) {
            if (j >= K) throw InvalidArgument("oracle_permutation: set member exceeds K");
            C(truth[i], j) -= 1;
        }
    }
    for (int k = 0; k < K; ++k)
        for (int j = 0; j < K; ++j) C(k, j) += count[static_cast<std::size_t>(k)];
    return solve_assignment(C);
}

CoverageReport coverage_report(std::span<const ConfidenceSet> sets, const Labeling& truth) {
    CoverageReport r;
    r.oracle_permutation = oracle_permutation(sets, truth);
    r.coverage = coverage_under(sets, truth, r.oracle_permutation);
    r.n_test = truth.size();
    r.size_histogram.assign(static_cast<std::size_t>(truth.K() + 1), 0);
    double total = 0.0;
    for (const auto& s : sets) {
        ++r.size_histogram[static_cast<std::size_t>(s.size())];
        total += s.size();
    }
    r.mean_set_size = total / r.n_test;
    return r;
}

CoverageReport evaluate_coverage(const ConformalPipeline& pipeline, const Dataset& X_test, const Labeling& Y_true) {
    if (X_test.n() != Y_true.size()) throw InvalidArgument("evaluate_coverage: length mismatch");
    const std::vector<ConfidenceSet> sets = predict_sets(pipeline, X_test);
    return coverage_report(sets, Y_true);
}

//==============================================================================
// Diagnostics
//==============================================================================

double l1_distance(const ProbVector& a, const ProbVector& b) {
    if (a.size() != b.size()) throw InvalidArgument("l1_distance: size mismatch");
    double s = 0.0;
    for (int k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
    return s;
}

double hellinger_sq(const ProbVector& a, const ProbVector& b) {
    if (a.size() != b.size()) throw InvalidArgument("hellinger_sq: size mismatch");
    double s = 0.0;
    for (int k = 0; k < a.size(); ++k) {
        const double d = std::sqrt(a[k]) - std::sqrt(b[k]);
        s += d * d;
    }
    return std::min(1.0, 0.5 * s);
}

Permutation match_components(const SoftLabelMatrix& estimate, const SoftLabelMatrix& reference) {
    if (estimate.n() != reference.n() || estimate.K() != reference.K())
        throw InvalidArgument("match_components: shape mismatch");
    const int K = reference.K();
    Matrix C(K, K);
    for (int k = 0; k < K; ++k)
        for (int j = 0; j < K; ++j) C(k, j) = (estimate.matrix().col(j) - reference.matrix().col(k)).cwiseAbs().sum();
    return solve_assignment_real(C);
}

namespace {

Matrix permute_columns(const Matrix& M, const Permutation& m) {
    Matrix out(M.rows(), M.cols());
    for (int k = 0; k < m.size(); ++k) out.col(k) = M.col(m(k));
    return out;
}

}  // namespace

double aligned_l1_gap(const SoftLabelMatrix& estimate, const SoftLabelMatrix& reference) {
    const Permutation m = match_components(estimate, reference);
    const Matrix E = permute_columns(estimate.matrix(), m);
    return (E - reference.matrix()).cwiseAbs().sum() / reference.n();
}

double product_l1_bound(std::span<const double> h2) {
    double log_prod = 0.0;
    for (double h : h2) log_prod += std::log1p(-std::min(h, 1.0));
    const double one_minus_prod = -std::expm1(log_prod);
    return std::min(2.0, 2.0 * std::sqrt(2.0 * std::max(0.0, one_minus_prod)));
}

double exact_product_l1(const SoftLabelMatrix& a, const SoftLabelMatrix& b) {
    if (a.n() != b.n() || a.K() != b.K()) throw InvalidArgument("exact_product_l1: shape mismatch");
    const int m = a.n();
    const int K = a.K();
    double states = 1.0;
    for (int j = 0; j < m; ++j) states *= K;
    if (states > 4096.0) throw UnsupportedSize("exact_product_l1: more than 4096 joint labelings");
    std::vector<int> y(static_cast<std::size_t>(m), 0);
    double total = 0.0;
    for (;;) {
        double pa = 1.0, pb = 1.0;
        for (int j = 0; j < m; ++j) {
            pa *= a.matrix()(j, y[static_cast<std::size_t>(j)]);
            pb *= b.matrix()(j, y[static_cast<std::size_t>(j)]);
        }
        total += std::abs(pa - pb);
        int j = 0;
        while (j < m && ++y[static_cast<std::size_t>(j)] == K) y[static_cast<std::size_t>(j++)] = 0;
        if (j == m) break;
    }
    return total;
}

namespace {

Dataset drop_first(const Dataset& X) {
    std::vector<int> idx(static_cast<std::size_t>(X.n() - 1));
    std::iota(idx.begin(), idx.end(), 1);
    return X.subset(idx);
}

StabilityInstance stability_from_fit(const ClustererSpec& spec, int K, const Dataset& X, const FittedClusterer& orig,
                                     const Vector& replacement, RandomSeed seed) {
    if (X.n() < 2) throw InvalidArgument("replace_one_stability: need n >= 2");
    Matrix Xr = X.matrix();
    Xr.row(0) = replacement.transpose();
    const FittedClusterer refit = fit_clusterer(spec, K, Dataset(std::move(Xr)), seed);

    const Dataset rest = drop_first(X);
    SoftLabelMatrix a = orig.sample_soft(rest);
    SoftLabelMatrix b = refit.sample_soft(rest);
    const Permutation m = match_components(b, a);
    b = SoftLabelMatrix(permute_columns(b.matrix(), m));

    StabilityInstance out{0.0, {}, std::move(a), std::move(b)};
    out.hellinger_sq.reserve(static_cast<std::size_t>(rest.n()));
    for (int j = 0; j < rest.n(); ++j) out.hellinger_sq.push_back(hellinger_sq(out.original.row(j), out.replaced.row(j)));
    out.bound = product_l1_bound(out.hellinger_sq);
    return out;
}

bool is_fit_failure(const std::exception& e) {
    return dynamic_cast<const DegenerateFit*>(&e) || dynamic_cast<const NumericError*>(&e);
}

DiagnosticEstimate summarize(std::vector<double> values, int failures, int reps) {
    if (failures * 5 > reps)
        throw DiagnosticsError(std::to_string(failures) + " of " + std::to_string(reps) + " fits failed");
    DiagnosticEstimate d;
    d.failures = failures;
    d.reps_ok = static_cast<int>(values.size());
    if (!values.empty()) {
        d.mean = std::accumulate(values.begin(), values.end(), 0.0) / d.reps_ok;
        double ss = 0.0;
        for (double v : values) ss += (v - d.mean) * (v - d.mean);
        d.se = d.reps_ok > 1 ? std::sqrt(ss / (d.reps_ok - 1) / d.reps_ok) : 0.0;
    }
    d.per_rep = std::move(values);
    return d;
}

enum class DiagTag : std::uint64_t { Data = 11, Fit = 12 };

struct RepOutcome {
    bool ok = false;
    double e = 0.0;
    double s = 0.0;
};

RepOutcome diagnostic_rep(const ClustererSpec& spec, const GeneratorConfig& gen, int n, RandomSeed rep_seed,
                          bool want_e, bool want_s) {
    const SimulatedData d = generate_mixture_data(gen, n + 1, rep_seed.child(static_cast<std::uint64_t>(DiagTag::Data)));
    std::vector<int> first(static_cast<std::size_t>(n));
    std::iota(first.begin(), first.end(), 0);
    const Dataset X = d.X.subset(first);
    const RandomSeed fit_seed = rep_seed.child(static_cast<std::uint64_t>(DiagTag::Fit));
    RepOutcome r;
    try {
        const FittedClusterer g = fit_clusterer(spec, gen.K(), X, fit_seed);
        if (want_e) r.e = aligned_l1_gap(g.sample_soft(X), true_posterior(gen, X));
        if (want_s) r.s = stability_from_fit(spec, gen.K(), X, g, d.X.row(n), fit_seed).bound;
        r.ok = true;
    } catch (const std::exception& e) {
        if (!is_fit_failure(e)) throw;
    }
    return r;
}

}  // namespace

StabilityInstance replace_one_stability(const ClustererSpec& spec, int K, const Dataset& X, const Vector& replacement,
                                        RandomSeed seed) {
    const FittedClusterer orig = fit_clusterer(spec, K, X, seed);
    return stability_from_fit(spec, K, X, orig, replacement, seed);
}

DiagnosticEstimate estimate_estimation_error(const ClustererSpec& spec, const GeneratorConfig& gen, int n, int reps,
                                             RandomSeed seed) {
    if (n < gen.K() || reps < 1) throw InvalidArgument("estimate_estimation_error: need n >= K and reps >= 1");
    std::vector<double> v;
    int failures = 0;
    for (int r = 0; r < reps; ++r) {
        const RepOutcome o = diagnostic_rep(spec, gen, n, seed.child(static_cast<std::uint64_t>(r)), true, false);
        if (o.ok) v.push_back(o.e);
        else ++failures;
    }
    return summarize(std::move(v), failures, reps);
}

DiagnosticEstimate estimate_stability_upper(const ClustererSpec& spec, const GeneratorConfig& gen, int n, int reps,
                                            RandomSeed seed) {
    if (n < std::max(2, gen.K()) || reps < 1) throw InvalidArgument("estimate_stability_upper: need n >= max(2, K)");
    std::vector<double> v;
    int failures = 0;
    for (int r = 0; r < reps; ++r) {
        const RepOutcome o = diagnostic_rep(spec, gen, n, seed.child(static_cast<std::uint64_t>(r)), false, true);
        if (o.ok) v.push_back(o.s);
        else ++failures;
    }
    return summarize(std::move(v), failures, reps);
}

double coverage_bound_rhs(double alpha, double E_half, double S_half, int n) {
    const double nn = n;
    return 1.0 - alpha - nn / (nn + 2.0) * E_half - nn / (2.0 * (nn + 2.0)) * S_half;
}

DiagnosticsReport run_diagnostics(const ClustererSpec& spec, const GeneratorConfig& gen, int n, int reps, double alpha,
                                  RandomSeed seed) {
    if (n < std::max(2, gen.K()) || reps < 1) throw InvalidArgument("run_diagnostics: need n >= max(2, K), reps >= 1");
    std::vector<double> e, s;
    int failures = 0;
    for (int r = 0; r < reps; ++r) {
        const RepOutcome o = diagnostic_rep(spec, gen, n, seed.child(static_cast<std::uint64_t>(r)), true, true);
        if (o.ok) {
            e.push_back(o.e);
            s.push_back(o.s);
        } else {
            ++failures;
        }
    }
    const DiagnosticEstimate E = summarize(std::move(e), failures, reps);
    const DiagnosticEstimate S = summarize(std::move(s), failures, reps);
    DiagnosticsReport rep;
    rep.n = n;
    rep.reps = reps;
    rep.E_hat = E.mean;
    rep.E_se = E.se;
    rep.S_hat_upper = S.mean;
    rep.S_se = S.se;
    rep.failures = failures;
    rep.bound_rhs = coverage_bound_rhs(alpha, E.mean, S.mean, 2 * n);
    return rep;
}

}  // namespace confclust
