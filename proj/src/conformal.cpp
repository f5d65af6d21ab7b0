#include "confclust/conformal.hpp"

#include <algorithm>
#include <cmath>

namespace confclust {

ConfidenceSet::ConfidenceSet(std::vector<int> members) : members_(std::move(members)) {
    std::sort(members_.begin(), members_.end());
    if (std::adjacent_find(members_.begin(), members_.end()) != members_.end())
        throw InvalidArgument("ConfidenceSet: duplicate member");
}

bool ConfidenceSet::contains(int label) const {
    return std::binary_search(members_.begin(), members_.end(), label);
}

std::vector<double> aps_scores(const ProbVector& pi) {
    const SimplexRanks r = simplex_ranks(pi);
    std::vector<double> s(static_cast<std::size_t>(pi.size()));
    double cum = 0.0;
    for (std::size_t pos = 0; pos < r.order.size(); ++pos) {
        s[static_cast<std::size_t>(r.order[pos])] = cum;
        cum += r.sorted[pos];
    }
    return s;
}

double aps_score(const ProbVector& pi, int y) {
    if (y < 0 || y >= pi.size()) throw InvalidArgument("aps_score: label out of range");
    return aps_scores(pi)[static_cast<std::size_t>(y)];
}

double calibration_threshold(std::span<const double> scores, double alpha) {
    if (scores.empty()) throw InvalidArgument("calibration_threshold: no scores");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("calibration_threshold: alpha outside (0,1)");
    const auto n = static_cast<double>(scores.size());
    // guard the ceiling against representation error in (1 - alpha)(n + 1)
    const double raw = (1.0 - alpha) * (n + 1.0);
    const auto index = static_cast<std::size_t>(std::ceil(raw - 1e-9 * (n + 1.0)));
    if (index > scores.size()) return kInfiniteThreshold;
    std::vector<double> sorted(scores.begin(), scores.end());
    const auto nth = sorted.begin() + static_cast<std::ptrdiff_t>(std::max<std::size_t>(index, 1) - 1);
    std::nth_element(sorted.begin(), nth, sorted.end());
    return *nth;
}

ConfidenceSet prediction_set(const ProbVector& pi, double threshold) {
    const std::vector<double> s = aps_scores(pi);
    std::vector<int> members;
    for (int y = 0; y < pi.size(); ++y)
        if (s[static_cast<std::size_t>(y)] <= threshold) members.push_back(y);
    return ConfidenceSet(std::move(members));
}

ConfidenceSet cutoff_set(const ProbVector& gamma, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("cutoff_set: alpha outside (0,1)");
    const SimplexRanks r = simplex_ranks(gamma);
    std::vector<int> members;
    double cum = 0.0;
    for (std::size_t pos = 0; pos < r.order.size(); ++pos) {
        members.push_back(r.order[pos]);
        cum += r.sorted[pos];
        if (cum >= 1.0 - alpha - 1e-12) break;
    }
    return ConfidenceSet(std::move(members));
}

std::string to_string(LabelMode m) { return m == LabelMode::Stochastic ? "stochastic" : "naive-hard"; }

LabelMode label_mode_from_string(const std::string& s) {
    if (s == "stochastic") return LabelMode::Stochastic;
    if (s == "naive-hard") return LabelMode::NaiveHard;
    throw InvalidArgument("unknown mode '" + s + "'");
}

namespace {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const PipelineError&) {
        throw;
    } catch (const std::exception& e) {
        throw PipelineError(name, e.what());
    }
}

void check_config(const Dataset& X, const PipelineConfig& c) {
    if (c.K < 1) throw InvalidArgument("K < 1");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw InvalidArgument("alpha outside (0,1)");
    if (X.n() < 2 * c.K) throw InvalidArgument("need n >= 2K observations");
    if (c.skip_classifier && c.clusterer.kind == ClustererKind::Fcm)
        throw InvalidArgument("skip_classifier needs a mixture clusterer");
}

std::vector<double> calibration_scores(const SoftLabelMatrix& proba, const Labeling& aligned) {
    std::vector<double> s(static_cast<std::size_t>(aligned.size()));
    for (int i = 0; i < aligned.size(); ++i) s[static_cast<std::size_t>(i)] = aps_score(proba.row(i), aligned[i]);
    return s;
}

}  // namespace

ConformalPipeline fit_conformal_pipeline(const Dataset& X, const PipelineConfig& config, RandomSeed seed) {
    check_config(X, config);
    const int K = config.K;
    const SplitIndices split =
        stage("split", [&] { return split_indices(X.n(), config.train_fraction, stage_seed(seed, Stage::Split)); });
    const Dataset X_tr = X.subset(split.train);
    const Dataset X_ca = X.subset(split.calib);

    ClustererSpec cspec = config.clusterer;
    cspec.one_hot = config.mode == LabelMode::NaiveHard;

    const FittedClusterer g_tr =
        stage("cluster-train", [&] { return fit_clusterer(cspec, K, X_tr, stage_seed(seed, Stage::ClusterTrain)); });
    const Labeling Y_tr = stage("sample-train", [&] {
        return sample_stochastic_labels(g_tr.sample_soft(X_tr), stage_seed(seed, Stage::SampleTrain));
    });

    ClassifierModel clf = stage("classifier", [&] {
        if (config.skip_classifier) {
            if (!g_tr.is_mixture()) throw InvalidArgument("skip_classifier needs a mixture clusterer");
            return ClassifierModel::posterior(g_tr.mixture());
        }
        return fit_soft_classifier(X_tr, Y_tr, K, config.classifier, stage_seed(seed, Stage::Classifier));
    });

    const FittedClusterer g_ca =
        stage("cluster-calib", [&] { return fit_clusterer(cspec, K, X_ca, stage_seed(seed, Stage::ClusterCalib)); });
    const Labeling Y_ca = stage("sample-calib", [&] {
        return sample_stochastic_labels(g_ca.sample_soft(X_ca), stage_seed(seed, Stage::SampleCalib));
    });

    return stage("calibrate", [&] {
        const SoftLabelMatrix proba = predict_proba(clf, X_ca);
        const Labeling f_hat = argmax_labels(proba);
        Permutation sigma = solve_assignment(build_confusion_cost(f_hat, Y_ca, K));
        std::vector<double> scores = calibration_scores(proba, sigma.apply(Y_ca));
        const double q = calibration_threshold(scores, config.alpha);
        return ConformalPipeline{std::move(clf), std::move(sigma), q, config.alpha, config.mode, seed, config,
                                 std::move(scores), X_tr.n(), X_ca.n()};
    });
}

ConformalPipeline fit_conformal_from_labels(const Dataset& X, const Labeling& Y, const PipelineConfig& config,
                                            RandomSeed seed) {
    check_config(X, config);
    if (Y.size() != X.n()) throw InvalidArgument("label count mismatch");
    const SplitIndices split =
        stage("split", [&] { return split_indices(X.n(), config.train_fraction, stage_seed(seed, Stage::Split)); });
    const Dataset X_tr = X.subset(split.train);
    const Dataset X_ca = X.subset(split.calib);
    const Labeling Y_tr = Y.subset(split.train);
    const Labeling Y_ca = Y.subset(split.calib);

    ClassifierModel clf = stage("classifier", [&] {
        return fit_soft_classifier(X_tr, Y_tr, config.K, config.classifier, stage_seed(seed, Stage::Classifier));
    });
    return stage("calibrate", [&] {
        const SoftLabelMatrix proba = predict_proba(clf, X_ca);
        std::vector<double> scores = calibration_scores(proba, Labeling(Y_ca.labels(), config.K));
        const double q = calibration_threshold(scores, config.alpha);
        return ConformalPipeline{std::move(clf), Permutation::identity(config.K), q, config.alpha, config.mode, seed,
                                 config, std::move(scores), X_tr.n(), X_ca.n()};
    });
}

std::vector<ConfidenceSet> predict_sets(const ConformalPipeline& pipeline, const Dataset& X_query) {
    if (X_query.p() != pipeline.classifier.p()) throw InvalidArgument("predict_sets: dimension mismatch");
    const SoftLabelMatrix proba = predict_proba(pipeline.classifier, X_query);
    std::vector<ConfidenceSet> out;
    out.reserve(static_cast<std::size_t>(X_query.n()));
    for (int i = 0; i < X_query.n(); ++i) out.push_back(prediction_set(proba.row(i), pipeline.threshold));
    return out;
}

}  // namespace confclust
