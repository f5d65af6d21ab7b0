#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "confclust/align.hpp"
#include "confclust/classify.hpp"
#include "confclust/clustering.hpp"
#include "confclust/core.hpp"

namespace confclust {

/// A subset of {0, ..., K-1}, members kept in ascending order.
class ConfidenceSet {
public:
    ConfidenceSet() = default;
    explicit ConfidenceSet(std::vector<int> members);

    int size() const noexcept { return static_cast<int>(members_.size()); }
    bool empty() const noexcept { return members_.empty(); }
    bool contains(int label) const;
    const std::vector<int>& members() const noexcept { return members_; }

    friend bool operator==(const ConfidenceSet&, const ConfidenceSet&) = default;

private:
    std::vector<int> members_;
};

constexpr double kInfiniteThreshold = std::numeric_limits<double>::infinity();

/// Generalized inverse quantile score: total mass of the labels ranked strictly
/// above y. The top-ranked label scores exactly 0.
double aps_score(const ProbVector& pi, int y);
/// Scores of every label at once, indexed by label.
std::vector<double> aps_scores(const ProbVector& pi);

/// The ceil((1 - alpha)(n + 1))-th smallest score, or +inf when that index exceeds n.
double calibration_threshold(std::span<const double> scores, double alpha);

/// Labels whose score is <= threshold.
ConfidenceSet prediction_set(const ProbVector& pi, double threshold);

/// Smallest prefix of the descending-sorted labels reaching cumulative mass 1 - alpha.
ConfidenceSet cutoff_set(const ProbVector& gamma, double alpha);

//==============================================================================
// Pipelines
//==============================================================================

enum class LabelMode {
    Stochastic,  ///< labels sampled from the soft clustering
    NaiveHard,   ///< deterministic argmax labels
};

std::string to_string(LabelMode m);
LabelMode label_mode_from_string(const std::string& s);

struct PipelineConfig {
    int K = 2;
    double alpha = 0.1;
    double train_fraction = 0.5;
    LabelMode mode = LabelMode::Stochastic;
    ClustererSpec clusterer;
    ClassifierSpec classifier;
    /// Use the training clusterer's posterior directly as the soft classifier
    /// (mixture clusterers only).
    bool skip_classifier = false;
};

struct ConformalPipeline {
    ClassifierModel classifier;
    Permutation alignment;  ///< calibration cluster label -> classifier label
    double threshold = 0.0;
    double alpha = 0.1;
    LabelMode mode = LabelMode::Stochastic;
    RandomSeed seed;
    PipelineConfig config;
    std::vector<double> calibration_scores;
    int n_train = 0;
    int n_calib = 0;
};

/// Split, label the training half (sampled or argmax), fit the classifier, label the
/// calibration half independently, align by minimum disagreement, score, threshold.
ConformalPipeline fit_conformal_pipeline(const Dataset& X, const PipelineConfig& config, RandomSeed seed);

/// Split conformal classification on supplied labels: the exchangeable control,
/// with the identity alignment.
ConformalPipeline fit_conformal_from_labels(const Dataset& X, const Labeling& Y, const PipelineConfig& config,
                                            RandomSeed seed);

std::vector<ConfidenceSet> predict_sets(const ConformalPipeline& pipeline, const Dataset& X_query);

/// Seed sub-stream tags for the pipeline stages.
enum class Stage : std::uint64_t { Split = 1, ClusterTrain, SampleTrain, Classifier, ClusterCalib, SampleCalib };

inline RandomSeed stage_seed(RandomSeed s, Stage st) { return s.child(static_cast<std::uint64_t>(st)); }

}  // namespace confclust
