#pragma once

#include <string>
#include <vector>

#include "confclust/classify.hpp"
#include "confclust/clustering.hpp"
#include "confclust/core.hpp"

namespace confclust {

enum class GeneratorFamily { Gaussian, Gamma };

std::string to_string(GeneratorFamily f);
GeneratorFamily generator_family_from_string(const std::string& s);

/// Mixture with known truth: component k has center centers.row(k) and common
/// per-coordinate variance sigma2 (independent gamma coordinates for Gamma, whose
/// mean is the center coordinate).
struct GeneratorConfig {
    GeneratorFamily family = GeneratorFamily::Gaussian;
    Matrix centers;  // K x p
    double sigma2 = 1.0;
    ProbVector weights;

    int K() const noexcept { return static_cast<int>(centers.rows()); }
    int p() const noexcept { return static_cast<int>(centers.cols()); }
    void validate() const;
};

/// Built-in center layouts. p = 2, K = 3: equilateral triangle of side 6 around the
/// origin (shifted by (8, 8) for Gamma). p >= K: scaled unit vectors with pairwise
/// distance 10 (shifted by 8 in every coordinate for Gamma). Equal weights.
GeneratorConfig default_generator(GeneratorFamily family, int p, int K, double sigma2);

struct SimulatedData {
    Dataset X;
    Labeling Y;
};

SimulatedData generate_mixture_data(const GeneratorConfig& cfg, int n, RandomSeed seed);

/// The generator as a mixture model (gaussian-full with sigma2 I, or gamma-independent).
MixtureModel as_mixture_model(const GeneratorConfig& cfg);

ProbVector true_posterior(const GeneratorConfig& cfg, const Vector& x);
SoftLabelMatrix true_posterior(const GeneratorConfig& cfg, const Dataset& X);

//==============================================================================
// Replication engine
//==============================================================================

enum class Method { Stochastic, NaiveHard, Cutoff, TrueLabels };
enum class SweepKind { SampleSize, Variance, Fuzziness };

std::string to_string(Method m);
Method method_from_string(const std::string& s);
std::string to_string(SweepKind s);
SweepKind sweep_kind_from_string(const std::string& s);

struct ExperimentConfig {
    GeneratorConfig generator;
    SweepKind sweep = SweepKind::Variance;
    std::vector<double> values;
    int n = 1000;  ///< pool size when the sweep is not over n
    double alpha = 0.1;
    double train_fraction = 0.5;
    std::vector<Method> methods{Method::Stochastic};
    int reps = 1;
    int test_size = 2000;
    RandomSeed seed;
    ClustererSpec clusterer;
    ClassifierSpec classifier;
    int threads = 1;

    void validate() const;
};

struct ExperimentRecord {
    double sweep_value = 0.0;
    Method method = Method::Stochastic;
    int rep = 0;
    bool ok = false;
    double coverage = 0.0;
    double mean_set_size = 0.0;
    std::string error;
};

struct CellSummary {
    double sweep_value = 0.0;
    Method method = Method::Stochastic;
    int reps_ok = 0;
    int failures = 0;
    double mean_coverage = 0.0;
    double se_coverage = 0.0;
    double mean_set_size = 0.0;
    double se_set_size = 0.0;
    bool valid = false;  ///< at most 20% of replications failed
};

struct ExperimentResult {
    std::vector<ExperimentRecord> records;  ///< ordered by (value, rep, method)
    std::vector<CellSummary> cells;         ///< ordered by (value, method)

    bool all_valid() const;
    const CellSummary& cell(double value, Method m) const;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace confclust
