#include "confclust/clustering.hpp"

namespace confclust {

Labeling sample_stochastic_labels(const SoftLabelMatrix& soft, RandomSeed seed) {
    std::vector<int> labels(static_cast<std::size_t>(soft.n()));
    for (int i = 0; i < soft.n(); ++i)
        labels[static_cast<std::size_t>(i)] = sample_categorical(soft.row(i), seed.child(static_cast<std::uint64_t>(i)));
    return Labeling(std::move(labels), soft.K());
}

SoftLabelMatrix one_hot_soft_labels(const Labeling& hard) {
    Matrix P = Matrix::Zero(hard.size(), hard.K());
    for (int i = 0; i < hard.size(); ++i) P(i, hard[i]) = 1.0;
    return SoftLabelMatrix(std::move(P));
}

Labeling argmax_labels(const SoftLabelMatrix& soft) {
    std::vector<int> labels(static_cast<std::size_t>(soft.n()));
    for (int i = 0; i < soft.n(); ++i) {
        // first maximal entry, so ties resolve to the smallest label
        Eigen::Index k = 0;
        soft.matrix().row(i).maxCoeff(&k);
        labels[static_cast<std::size_t>(i)] = static_cast<int>(k);
    }
    return Labeling(std::move(labels), soft.K());
}

int FittedClusterer::K() const {
    return std::visit([](const auto& m) { return m.K(); }, model_);
}

SoftLabelMatrix FittedClusterer::soft(const Dataset& X) const {
    if (is_mixture()) return mixture_posterior(mixture(), X);
    return fcm_membership(fcm(), X);
}

ProbVector FittedClusterer::soft(const Vector& x) const {
    if (is_mixture()) return mixture_posterior(mixture(), x);
    return fcm_membership(fcm(), x);
}

SoftLabelMatrix FittedClusterer::sample_soft(const Dataset& X) const {
    SoftLabelMatrix s = soft(X);
    if (!one_hot_) return s;
    return one_hot_soft_labels(argmax_labels(s));
}

FittedClusterer fit_clusterer(const ClustererSpec& spec, int K, const Dataset& X, RandomSeed seed) {
    switch (spec.kind) {
        case ClustererKind::Mixture:
            return FittedClusterer(fit_mixture_em(X, K, spec.family, spec.em, seed), spec.one_hot);
        case ClustererKind::Fcm:
            return FittedClusterer(fit_fcm(X, K, spec.fcm, seed), spec.one_hot);
        case ClustererKind::Fixed:
            if (!spec.fixed) throw InvalidArgument("fixed clusterer without a model");
            if (spec.fixed->K() != K) throw InvalidArgument("fixed clusterer has the wrong K");
            if (spec.fixed->p() != X.p()) throw InvalidArgument("fixed clusterer has the wrong dimension");
            return FittedClusterer(*spec.fixed, spec.one_hot);
    }
    throw InvalidArgument("unknown clusterer kind");
}

}  // namespace confclust
