#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "confclust/core.hpp"

namespace confclust {

/// Row-wise soft cluster labels: an n x K matrix whose rows are points on the simplex.
class SoftLabelMatrix {
public:
    SoftLabelMatrix() = default;
    /// Validates (and renormalizes) every row as a ProbVector.
    explicit SoftLabelMatrix(Matrix rows);

    int n() const noexcept { return static_cast<int>(p_.rows()); }
    int K() const noexcept { return static_cast<int>(p_.cols()); }
    ProbVector row(int i) const;
    const Matrix& matrix() const noexcept { return p_; }

private:
    Matrix p_;
};

enum class MixtureFamily { GaussianFull, GaussianDiag, GammaIndependent };

std::string to_string(MixtureFamily f);
MixtureFamily mixture_family_from_string(const std::string& s);

struct FitLog {
    double log_likelihood = 0.0;
    int iterations = 0;
    /// Log-likelihood after each M-step of the retained run (trace[0] is the initial state).
    std::vector<double> trace;
};

/// A fitted parametric mixture. Dispersion is stored per family:
///   GaussianFull      one p x p covariance per component
///   GaussianDiag      K x p per-coordinate variances
///   GammaIndependent  K x p per-coordinate variances (shape = mean^2/var, scale = var/mean)
class MixtureModel {
public:
    MixtureModel() = default;
    MixtureModel(MixtureFamily family, ProbVector weights, Matrix means, std::vector<Matrix> covariances,
                 Matrix variances, FitLog log = {});

    static MixtureModel gaussian_full(ProbVector weights, Matrix means, std::vector<Matrix> covariances);
    static MixtureModel gaussian_diag(ProbVector weights, Matrix means, Matrix variances);
    static MixtureModel gamma(ProbVector weights, Matrix means, Matrix variances);

    MixtureFamily family() const noexcept { return family_; }
    int K() const noexcept { return static_cast<int>(means_.rows()); }
    int p() const noexcept { return static_cast<int>(means_.cols()); }
    const ProbVector& weights() const noexcept { return weights_; }
    const Matrix& means() const noexcept { return means_; }
    const std::vector<Matrix>& covariances() const noexcept { return covariances_; }
    const Matrix& variances() const noexcept { return variances_; }
    const FitLog& fit_log() const noexcept { return log_; }

    double component_log_density(int k, const Vector& x) const;
    /// n x K matrix of log(weight_k) + log density_k(x_i).
    Matrix log_joint(const Matrix& X) const;

private:
    void precompute();

    MixtureFamily family_ = MixtureFamily::GaussianFull;
    ProbVector weights_;
    Matrix means_;
    std::vector<Matrix> covariances_;
    Matrix variances_;
    FitLog log_;

    // derived
    std::vector<Matrix> chol_lower_;
    std::vector<double> log_norm_;  // per-component additive constant of the log density
    Matrix shape_, scale_;
};

enum class EmInit { KMeansPlusPlus, RandomResponsibility };

struct EmOptions {
    EmInit init = EmInit::KMeansPlusPlus;
    double tol = 1e-6;  ///< stop when the total log-likelihood gain falls below this
    int max_iter = 500;
    int restarts = 5;
    double variance_floor = 1e-6;
};

/// EM for a K-component mixture; the run with the best final log-likelihood over
/// `restarts` seeded initializations is returned.
MixtureModel fit_mixture_em(const Dataset& X, int K, MixtureFamily family, const EmOptions& opts, RandomSeed seed);

ProbVector mixture_posterior(const MixtureModel& model, const Vector& x);
SoftLabelMatrix mixture_posterior(const MixtureModel& model, const Dataset& X);

//------------------------------------------------------------------------------
// Fuzzy c-means
//------------------------------------------------------------------------------

struct FcmModel {
    Matrix centroids;  // K x p
    double m = 2.0;
    int iterations = 0;
    double objective = 0.0;

    int K() const noexcept { return static_cast<int>(centroids.rows()); }
    int p() const noexcept { return static_cast<int>(centroids.cols()); }
};

struct FcmOptions {
    double m = 2.0;
    double tol = 1e-6;  ///< max centroid displacement
    int max_iter = 500;
    std::optional<Matrix> initial_centroids;
};

FcmModel fit_fcm(const Dataset& X, int K, const FcmOptions& opts, RandomSeed seed);
ProbVector fcm_membership(const FcmModel& model, const Vector& x);
SoftLabelMatrix fcm_membership(const FcmModel& model, const Dataset& X);

//------------------------------------------------------------------------------
// Stochastic labels
//------------------------------------------------------------------------------

/// Row i is drawn from Cat(soft.row(i)) on sub-stream seed.child(i).
Labeling sample_stochastic_labels(const SoftLabelMatrix& soft, RandomSeed seed);
SoftLabelMatrix one_hot_soft_labels(const Labeling& hard);
Labeling argmax_labels(const SoftLabelMatrix& soft);

//------------------------------------------------------------------------------
// Clusterer front end used by the pipelines and diagnostics
//------------------------------------------------------------------------------

enum class ClustererKind { Mixture, Fcm, Fixed };

struct ClustererSpec {
    ClustererKind kind = ClustererKind::Mixture;
    MixtureFamily family = MixtureFamily::GaussianFull;
    EmOptions em;
    FcmOptions fcm;
    /// Kind::Fixed ignores the data and always returns this model (a known-truth stub).
    std::optional<MixtureModel> fixed;
    /// Replace soft labels at sample points by one-hot argmax labels.
    bool one_hot = false;
};

class FittedClusterer {
public:
    FittedClusterer(std::variant<MixtureModel, FcmModel> model, bool one_hot)
        : model_(std::move(model)), one_hot_(one_hot) {}

    int K() const;
    bool is_mixture() const noexcept { return std::holds_alternative<MixtureModel>(model_); }
    const MixtureModel& mixture() const { return std::get<MixtureModel>(model_); }
    const FcmModel& fcm() const { return std::get<FcmModel>(model_); }

    /// Soft labels at arbitrary points, never one-hot encoded.
    SoftLabelMatrix soft(const Dataset& X) const;
    ProbVector soft(const Vector& x) const;
    /// Labels to sample from at the points the clusterer was fitted on.
    SoftLabelMatrix sample_soft(const Dataset& X) const;

private:
    std::variant<MixtureModel, FcmModel> model_;
    bool one_hot_;
};

FittedClusterer fit_clusterer(const ClustererSpec& spec, int K, const Dataset& X, RandomSeed seed);

}  // namespace confclust
