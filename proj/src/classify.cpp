#include "confclust/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace confclust {

std::string to_string(ClassifierKind k) {
    switch (k) {
        case ClassifierKind::Logistic: return "multinomial-logistic";
        case ClassifierKind::KnnSoft: return "knn-soft";
        case ClassifierKind::MixturePosterior: return "mixture-posterior";
    }
    return "?";
}

ClassifierKind classifier_kind_from_string(const std::string& s) {
    if (s == "multinomial-logistic") return ClassifierKind::Logistic;
    if (s == "knn-soft") return ClassifierKind::KnnSoft;
    if (s == "mixture-posterior") return ClassifierKind::MixturePosterior;
    throw InvalidArgument("unknown classifier kind '" + s + "'");
}

Matrix FeatureMap::design(const Matrix& X) const {
    const int D = dim();
    Matrix Phi(X.rows(), D + 1);
    if (random) {
        const double amp = std::sqrt(2.0 / D);
        Phi.leftCols(D) = amp * ((X * W.transpose()).rowwise() + offset.transpose()).array().cos().matrix();
    } else {
        Phi.leftCols(D) = ((X.rowwise() - center.transpose()).array().rowwise() / scale.transpose().array()).matrix();
    }
    Phi.col(D).setOnes();
    return Phi;
}

ClassifierModel ClassifierModel::logistic(int K, int p, FeatureMap map, Matrix coef, std::vector<double> loss_trace) {
    if (K < 2) throw InvalidArgument("logistic classifier needs K >= 2");
    if (coef.rows() != map.dim() + 1 || coef.cols() != K) throw InvalidArgument("logistic coefficient shape");
    if (map.random ? map.W.cols() != p : map.center.size() != p) throw InvalidArgument("feature map dimension");
    ClassifierModel m;
    m.kind_ = ClassifierKind::Logistic;
    m.K_ = K;
    m.p_ = p;
    m.map_ = std::move(map);
    m.coef_ = std::move(coef);
    m.loss_trace_ = std::move(loss_trace);
    return m;
}

ClassifierModel ClassifierModel::knn(int K, Dataset train, Labeling labels, int neighbors) {
    if (labels.size() != train.n()) throw InvalidArgument("knn: label count mismatch");
    if (neighbors < 1 || neighbors > train.n()) throw InvalidArgument("knn: need 1 <= k <= n_train");
    if (labels.K() > K) throw InvalidArgument("knn: labels exceed K");
    ClassifierModel m;
    m.kind_ = ClassifierKind::KnnSoft;
    m.K_ = K;
    m.p_ = train.p();
    m.train_ = std::move(train);
    m.labels_ = std::move(labels);
    m.neighbors_ = neighbors;
    return m;
}

ClassifierModel ClassifierModel::posterior(MixtureModel model) {
    ClassifierModel m;
    m.kind_ = ClassifierKind::MixturePosterior;
    m.K_ = model.K();
    m.p_ = model.p();
    m.mixture_ = std::move(model);
    return m;
}

namespace {

double median_pairwise_distance(const Matrix& X, int subsample, Rng& rng) {
    std::vector<int> idx(static_cast<std::size_t>(X.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    if (static_cast<int>(idx.size()) > subsample) {
        for (std::size_t i = 0; i < static_cast<std::size_t>(subsample); ++i)
            std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
        idx.resize(static_cast<std::size_t>(subsample));
    }
    std::vector<double> d;
    d.reserve(idx.size() * (idx.size() - 1) / 2);
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = a + 1; b < idx.size(); ++b) d.push_back((X.row(idx[a]) - X.row(idx[b])).norm());
    if (d.empty()) return 1.0;
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    return *mid > 0.0 ? *mid : 1.0;
}

/// Mean cross-entropy plus ridge penalty (intercept row unpenalized). Fills grad when given.
double logistic_objective(const Matrix& Phi, const Matrix& onehot, const Matrix& coef, double ridge, Matrix* grad) {
    const Eigen::Index n = Phi.rows();
    Matrix S = Phi * coef;
    const Vector hi = S.rowwise().maxCoeff();
    S = S.colwise() - hi;
    const Vector lse = S.array().exp().rowwise().sum().log().matrix();
    const double ce = (lse.sum() - (S.array() * onehot.array()).sum()) / static_cast<double>(n);
    const Eigen::Index D = coef.rows() - 1;
    const double penalty = 0.5 * ridge * coef.topRows(D).squaredNorm();
    if (grad) {
        const Matrix P = (S.colwise() - lse).array().exp().matrix();
        *grad = Phi.transpose() * (P - onehot) / static_cast<double>(n);
        grad->topRows(D) += ridge * coef.topRows(D);
    }
    return ce + penalty;
}

ClassifierModel fit_logistic(const Dataset& X, const Labeling& Y, int K, const ClassifierSpec& spec, RandomSeed seed) {
    if (K < 2) throw InvalidArgument("logistic classifier needs K >= 2");
    FeatureMap map;
    map.random = spec.random_features;
    if (map.random) {
        if (spec.num_features < 1) throw InvalidArgument("num_features < 1");
        Rng rng(seed);
        map.bandwidth = spec.bandwidth ? *spec.bandwidth
                                       : median_pairwise_distance(X.matrix(), spec.bandwidth_subsample, rng);
        if (!(map.bandwidth > 0.0)) throw InvalidArgument("bandwidth must be positive");
        map.W.resize(spec.num_features, X.p());
        for (Eigen::Index i = 0; i < map.W.size(); ++i) map.W.data()[i] = rng.normal() / map.bandwidth;
        map.offset.resize(spec.num_features);
        for (Eigen::Index i = 0; i < map.offset.size(); ++i) map.offset(i) = 2.0 * std::numbers::pi * rng.uniform();
    } else {
        map.center = X.matrix().colwise().mean().transpose();
        map.scale = ((X.matrix().rowwise() - map.center.transpose()).array().square().colwise().mean().sqrt())
                        .transpose()
                        .matrix();
        for (Eigen::Index j = 0; j < map.scale.size(); ++j)
            if (!(map.scale(j) > 0.0)) map.scale(j) = 1.0;
    }

    const Matrix Phi = map.design(X.matrix());
    Matrix onehot = Matrix::Zero(X.n(), K);
    for (int i = 0; i < Y.size(); ++i) onehot(i, Y[i]) = 1.0;

    Matrix coef = Matrix::Zero(Phi.cols(), K);
    Matrix grad;
    double loss = logistic_objective(Phi, onehot, coef, spec.ridge, &grad);
    std::vector<double> trace{loss};
    double step = 1.0;
    for (int it = 0; it < spec.max_iter; ++it) {
        const double g2 = grad.squaredNorm();
        if (std::sqrt(g2) < spec.grad_tol) break;
        step *= 2.0;
        Matrix trial;
        double trial_loss = 0.0;
        for (;;) {
            trial = coef - step * grad;
            trial_loss = logistic_objective(Phi, onehot, trial, spec.ridge, nullptr);
            if (std::isfinite(trial_loss) && trial_loss <= loss - 1e-4 * step * g2) break;
            step *= 0.5;
            if (step < 1e-20) break;
        }
        if (step < 1e-20) break;  // no descent possible at working precision
        coef = std::move(trial);
        loss = logistic_objective(Phi, onehot, coef, spec.ridge, &grad);
        if (!std::isfinite(loss)) throw NumericError("logistic regression: non-finite loss");
        trace.push_back(loss);
    }
    return ClassifierModel::logistic(K, X.p(), std::move(map), std::move(coef), std::move(trace));
}

}  // namespace

ClassifierModel fit_soft_classifier(const Dataset& X, const Labeling& Y, int K, const ClassifierSpec& spec,
                                    RandomSeed seed) {
    if (X.n() != Y.size()) throw InvalidArgument("fit_soft_classifier: |X| != |Y|");
    if (Y.size() == 0) throw InvalidArgument("fit_soft_classifier: empty training set");
    if (Y.K() > K) throw InvalidArgument("fit_soft_classifier: labels exceed K");
    switch (spec.kind) {
        case ClassifierKind::Logistic: return fit_logistic(X, Y, K, spec, seed);
        case ClassifierKind::KnnSoft:
            return ClassifierModel::knn(K, X, Labeling(Y.labels(), K), std::min(spec.neighbors, X.n()));
        case ClassifierKind::MixturePosterior:
            throw InvalidArgument("mixture-posterior classifiers are built from a fitted clusterer, not fitted");
    }
    throw InvalidArgument("unknown classifier kind");
}

Vector logistic_scores(const ClassifierModel& model, const Vector& x) {
    if (model.kind() != ClassifierKind::Logistic) throw InvalidArgument("logistic_scores: not a logistic model");
    if (x.size() != model.p()) throw InvalidArgument("logistic_scores: dimension mismatch");
    const Matrix Phi = model.feature_map().design(x.transpose());
    return (Phi * model.coefficients()).transpose();
}

namespace {

Matrix knn_proba(const ClassifierModel& model, const Matrix& Q) {
    const Matrix& T = model.train_points().matrix();
    const int K = model.K();
    const int k = model.neighbors();
    Matrix out(Q.rows(), K);
    std::vector<int> idx(static_cast<std::size_t>(T.rows()));
    for (Eigen::Index q = 0; q < Q.rows(); ++q) {
        const Vector d2 = (T.rowwise() - Q.row(q)).rowwise().squaredNorm();
        std::iota(idx.begin(), idx.end(), 0);
        std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                          [&](int a, int b) { return d2(a) < d2(b) || (d2(a) == d2(b) && a < b); });
        Eigen::RowVectorXd counts = Eigen::RowVectorXd::Constant(K, 1.0 / K);
        for (int r = 0; r < k; ++r) counts(model.train_labels()[idx[static_cast<std::size_t>(r)]]) += 1.0;
        out.row(q) = counts / (k + 1.0);
    }
    return out;
}

Matrix proba_matrix(const ClassifierModel& model, const Matrix& Q) {
    if (Q.cols() != model.p()) throw InvalidArgument("predict_proba: dimension mismatch");
    switch (model.kind()) {
        case ClassifierKind::Logistic: {
            Matrix S = model.feature_map().design(Q) * model.coefficients();
            S = S.colwise() - S.rowwise().maxCoeff();
            S = S.array().exp().matrix();
            return S.array().colwise() / S.rowwise().sum().array();
        }
        case ClassifierKind::KnnSoft: return knn_proba(model, Q);
        case ClassifierKind::MixturePosterior: return mixture_posterior(model.mixture(), Dataset(Q)).matrix();
    }
    throw InvalidArgument("unknown classifier kind");
}

}  // namespace

ProbVector predict_proba(const ClassifierModel& model, const Vector& x) {
    const Matrix P = proba_matrix(model, x.transpose());
    return ProbVector(std::span<const double>(P.data(), static_cast<std::size_t>(P.size())));
}

SoftLabelMatrix predict_proba(const ClassifierModel& model, const Dataset& X) {
    return SoftLabelMatrix(proba_matrix(model, X.matrix()));
}

int hard_rule(const ClassifierModel& model, const Vector& x) { return predict_proba(model, x).argmax(); }

Labeling hard_rule(const ClassifierModel& model, const Dataset& X) {
    return argmax_labels(predict_proba(model, X));
}

}  // namespace confclust
