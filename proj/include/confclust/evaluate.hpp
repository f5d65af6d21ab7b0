#pragma once

#include <span>
#include <vector>

#include "confclust/align.hpp"
#include "confclust/conformal.hpp"
#include "confclust/simulate.hpp"

namespace confclust {

struct CoverageReport {
    Permutation oracle_permutation;  ///< true label -> set label
    double coverage = 0.0;
    double mean_set_size = 0.0;
    std::vector<int> size_histogram;  ///< index = set size, 0..K
    int n_test = 0;
};

/// Empirical coverage of sets under the relabeling truth k -> perm(k).
double coverage_under(std::span<const ConfidenceSet> sets, const Labeling& truth, const Permutation& perm);

/// Relabeling of the truth maximizing empirical coverage, solved as an assignment
/// on the benefit matrix b(k, j) = #{i : truth_i = k, j in set_i}.
Permutation oracle_permutation(std::span<const ConfidenceSet> sets, const Labeling& truth);

CoverageReport coverage_report(std::span<const ConfidenceSet> sets, const Labeling& truth);
CoverageReport evaluate_coverage(const ConformalPipeline& pipeline, const Dataset& X_test, const Labeling& Y_true);

//==============================================================================
// Consistency / stability diagnostics
//==============================================================================

double l1_distance(const ProbVector& a, const ProbVector& b);
double hellinger_sq(const ProbVector& a, const ProbVector& b);

/// Permutation m minimizing sum_i sum_k |estimate(i, m(k)) - reference(i, k)|.
Permutation match_components(const SoftLabelMatrix& estimate, const SoftLabelMatrix& reference);

/// Mean over rows of the L1 gap after matching components.
double aligned_l1_gap(const SoftLabelMatrix& estimate, const SoftLabelMatrix& reference);

/// Upper bound 2 sqrt(2 (1 - prod_j (1 - H2_j))) on the L1 distance between two
/// product distributions with per-factor squared Hellinger distances H2_j.
double product_l1_bound(std::span<const double> hellinger_sq);

/// Exact L1 distance between the product distributions with factors a.row(j), b.row(j),
/// by enumerating all K^n joint labelings (requires K^n <= 4096).
double exact_product_l1(const SoftLabelMatrix& a, const SoftLabelMatrix& b);

struct StabilityInstance {
    double bound = 0.0;
    std::vector<double> hellinger_sq;  ///< per retained point j = 2..n
    SoftLabelMatrix original;          ///< soft labels at retained points, original fit
    SoftLabelMatrix replaced;          ///< same points, refit (components matched)
};

/// Fit on X, refit with row 0 replaced by `replacement` (same seed), and compare the
/// soft labels at rows 1..n-1.
StabilityInstance replace_one_stability(const ClustererSpec& spec, int K, const Dataset& X, const Vector& replacement,
                                        RandomSeed seed);

struct DiagnosticEstimate {
    double mean = 0.0;
    double se = 0.0;
    int reps_ok = 0;
    int failures = 0;
    std::vector<double> per_rep;
};

DiagnosticEstimate estimate_estimation_error(const ClustererSpec& spec, const GeneratorConfig& gen, int n, int reps,
                                             RandomSeed seed);
DiagnosticEstimate estimate_stability_upper(const ClustererSpec& spec, const GeneratorConfig& gen, int n, int reps,
                                            RandomSeed seed);

/// 1 - alpha - n/(n+2) E_half - n/(2(n+2)) S_half: the finite-sample coverage lower
/// bound for a pool of n split in halves, given the diagnostics at sample size n/2.
double coverage_bound_rhs(double alpha, double E_half, double S_half, int n);

struct DiagnosticsReport {
    int n = 0;  ///< clustering sample size (pool size is 2n)
    int reps = 0;
    double E_hat = 0.0;
    double E_se = 0.0;
    double S_hat_upper = 0.0;
    double S_se = 0.0;
    double bound_rhs = 0.0;
    int failures = 0;
};

/// E_hat and S_hat_upper at sample size n from shared fits, plus the bound for a pool of 2n.
DiagnosticsReport run_diagnostics(const ClustererSpec& spec, const GeneratorConfig& gen, int n, int reps, double alpha,
                                  RandomSeed seed);

}  // namespace confclust
