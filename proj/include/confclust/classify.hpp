#pragma once

#include <optional>
#include <string>
#include <vector>

#include "confclust/clustering.hpp"
#include "confclust/core.hpp"

namespace confclust {

enum class ClassifierKind {
    Logistic,          ///< multinomial logistic regression, optionally over random Fourier features
    KnnSoft,           ///< Laplace-smoothed k-nearest-neighbour label frequencies
    MixturePosterior,  ///< the training clusterer's own posterior (skips classifier fitting)
};

std::string to_string(ClassifierKind k);
ClassifierKind classifier_kind_from_string(const std::string& s);

struct ClassifierSpec {
    ClassifierKind kind = ClassifierKind::Logistic;
    // logistic
    bool random_features = true;
    int num_features = 256;
    std::optional<double> bandwidth;  ///< default: median pairwise distance on a subsample
    int bandwidth_subsample = 512;
    double ridge = 1e-3;
    double grad_tol = 1e-4;
    int max_iter = 1000;
    // knn
    int neighbors = 15;
};

/// Feature map applied before the linear scores. With random features,
/// z(x) = sqrt(2/D) cos(W x + b) with W ~ N(0, I / bandwidth^2), b ~ U[0, 2 pi);
/// otherwise the raw coordinates are standardized with the stored center/scale.
struct FeatureMap {
    bool random = false;
    Matrix W;        // D x p
    Vector offset;   // D
    double bandwidth = 1.0;
    Vector center;   // p (linear only)
    Vector scale;    // p (linear only)

    int dim() const noexcept { return random ? static_cast<int>(W.rows()) : static_cast<int>(center.size()); }
    /// n x (dim + 1) design matrix; the last column is the intercept.
    Matrix design(const Matrix& X) const;
};

class ClassifierModel {
public:
    static ClassifierModel logistic(int K, int p, FeatureMap map, Matrix coef, std::vector<double> loss_trace = {});
    static ClassifierModel knn(int K, Dataset train, Labeling labels, int neighbors);
    static ClassifierModel posterior(MixtureModel model);

    ClassifierKind kind() const noexcept { return kind_; }
    int K() const noexcept { return K_; }
    int p() const noexcept { return p_; }

    const FeatureMap& feature_map() const { return map_; }
    /// (dim + 1) x K, intercept in the last row.
    const Matrix& coefficients() const { return coef_; }
    const std::vector<double>& loss_trace() const { return loss_trace_; }
    const Dataset& train_points() const { return train_; }
    const Labeling& train_labels() const { return labels_; }
    int neighbors() const { return neighbors_; }
    const MixtureModel& mixture() const { return *mixture_; }

private:
    ClassifierModel() = default;

    ClassifierKind kind_ = ClassifierKind::Logistic;
    int K_ = 0;
    int p_ = 0;
    FeatureMap map_;
    Matrix coef_;
    std::vector<double> loss_trace_;
    Dataset train_;
    Labeling labels_;
    int neighbors_ = 0;
    std::optional<MixtureModel> mixture_;
};

/// Classes absent from Y are allowed and receive near-zero probability.
ClassifierModel fit_soft_classifier(const Dataset& X, const Labeling& Y, int K, const ClassifierSpec& spec,
                                    RandomSeed seed);

/// Linear scores (logits) of a logistic model; throws for other kinds.
Vector logistic_scores(const ClassifierModel& model, const Vector& x);

ProbVector predict_proba(const ClassifierModel& model, const Vector& x);
SoftLabelMatrix predict_proba(const ClassifierModel& model, const Dataset& X);

/// argmax of predict_proba, ties to the smallest label.
int hard_rule(const ClassifierModel& model, const Vector& x);
Labeling hard_rule(const ClassifierModel& model, const Dataset& X);

}  // namespace confclust
