#include "confclust/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace confclust {

ProbVector::ProbVector(std::vector<double> entries) : p_(std::move(entries)) {
    if (p_.empty()) throw InvalidArgument("ProbVector: empty");
    double sum = 0.0;
    for (double& v : p_) {
        if (!std::isfinite(v)) throw InvalidArgument("ProbVector: non-finite entry");
        // rounding noise from subtraction can leave tiny negatives
        if (v < 0.0) {
            if (v < -1e-12) throw InvalidArgument("ProbVector: negative entry " + std::to_string(v));
            v = 0.0;
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
        throw InvalidArgument("ProbVector: entries sum to " + std::to_string(sum));
    }
    for (double& v : p_) v = std::min(1.0, v / sum);
}

ProbVector ProbVector::uniform(int K) {
    if (K < 1) throw InvalidArgument("ProbVector::uniform: K < 1");
    return ProbVector(std::vector<double>(static_cast<std::size_t>(K), 1.0 / K));
}

ProbVector ProbVector::one_hot(int K, int label) {
    if (label < 0 || label >= K) throw InvalidArgument("ProbVector::one_hot: label out of range");
    std::vector<double> v(static_cast<std::size_t>(K), 0.0);
    v[static_cast<std::size_t>(label)] = 1.0;
    return ProbVector(std::move(v));
}

double log_sum_exp(std::span<const double> v) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double x : v) hi = std::max(hi, x);
    if (!std::isfinite(hi)) return hi;
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - hi);
    return hi + std::log(acc);
}

ProbVector ProbVector::from_log_weights(std::span<const double> log_weights) {
    const double lse = log_sum_exp(log_weights);
    if (!std::isfinite(lse)) throw NumericError("log weights are all -inf or contain +inf/NaN");
    std::vector<double> p(log_weights.size());
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::exp(log_weights[k] - lse);
    return ProbVector(std::move(p));
}

ProbVector ProbVector::softmax(std::span<const double> scores) {
    for (double s : scores)
        if (!std::isfinite(s)) throw NumericError("softmax: non-finite score");
    return from_log_weights(scores);
}

int ProbVector::argmax() const {
    return static_cast<int>(std::max_element(p_.begin(), p_.end()) - p_.begin());
}

Dataset::Dataset(Matrix rows) : x_(std::move(rows)) {
    if (x_.rows() < 1) throw InvalidArgument("Dataset: need at least one row");
    if (x_.cols() < 1) throw InvalidArgument("Dataset: need at least one column");
    if (!x_.allFinite()) throw InvalidArgument("Dataset: non-finite entry");
}

Dataset Dataset::subset(std::span<const int> indices) const {
    Matrix out(static_cast<Eigen::Index>(indices.size()), x_.cols());
    for (std::size_t r = 0; r < indices.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x_.row(indices[r]);
    return Dataset(std::move(out));
}

Labeling::Labeling(std::vector<int> labels, int K) : labels_(std::move(labels)), K_(K) {
    if (K < 1) throw InvalidArgument("Labeling: K < 1");
    for (int y : labels_)
        if (y < 0 || y >= K) throw InvalidArgument("Labeling: label " + std::to_string(y + 1) + " outside 1.." + std::to_string(K));
}

Labeling Labeling::subset(std::span<const int> indices) const {
    std::vector<int> out;
    out.reserve(indices.size());
    for (int i : indices) out.push_back(labels_[static_cast<std::size_t>(i)]);
    return Labeling(std::move(out), K_);
}

SplitIndices split_indices(int n, double train_fraction, RandomSeed seed) {
    if (n < 2) throw InvalidArgument("split_indices: n < 2");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InvalidArgument("split_indices: fraction outside (0,1)");
    const int n_train = static_cast<int>(std::lround(train_fraction * n));
    if (n_train < 1 || n_train > n - 1) throw InvalidArgument("split_indices: fraction leaves an empty part");

    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (std::size_t i = idx.size() - 1; i > 0; --i) std::swap(idx[i], idx[rng.index(i + 1)]);

    SplitIndices out;
    out.train.assign(idx.begin(), idx.begin() + n_train);
    out.calib.assign(idx.begin() + n_train, idx.end());
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.calib.begin(), out.calib.end());
    return out;
}

int sample_categorical(const ProbVector& p, Rng& rng) {
    const double u = rng.uniform();
    double cum = 0.0;
    int last_positive = 0;
    for (int k = 0; k < p.size(); ++k) {
        if (p[k] <= 0.0) continue;
        cum += p[k];
        last_positive = k;
        if (u < cum) return k;
    }
    return last_positive;
}

int sample_categorical(const ProbVector& p, RandomSeed seed) {
    Rng rng(seed);
    return sample_categorical(p, rng);
}

SimplexRanks simplex_ranks(const ProbVector& p) {
    const int K = p.size();
    SimplexRanks r;
    r.order.resize(static_cast<std::size_t>(K));
    std::iota(r.order.begin(), r.order.end(), 0);
    std::stable_sort(r.order.begin(), r.order.end(), [&](int a, int b) { return p[a] > p[b]; });
    r.sorted.resize(static_cast<std::size_t>(K));
    r.rank.resize(static_cast<std::size_t>(K));
    for (int pos = 0; pos < K; ++pos) {
        r.sorted[static_cast<std::size_t>(pos)] = p[r.order[static_cast<std::size_t>(pos)]];
        r.rank[static_cast<std::size_t>(r.order[static_cast<std::size_t>(pos)])] = pos;
    }
    return r;
}

}  // namespace confclust
