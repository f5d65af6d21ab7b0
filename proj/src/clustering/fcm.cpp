#include <cmath>

#include "confclust/clustering.hpp"
#include "seeding.hpp"

namespace confclust {

namespace {

constexpr double kCoincide = 1e-12;

/// Memberships u_k = 1 / sum_j (d_k / d_j)^(2/(m-1)), computed in log space.
/// Points sitting on one or more centroids split their mass uniformly over them.
void membership_row(const Matrix& centroids, double m, const Eigen::RowVectorXd& x, double* out) {
    const Eigen::Index K = centroids.rows();
    const Vector d = (centroids.rowwise() - x).rowwise().norm();
    int coincide = 0;
    for (Eigen::Index k = 0; k < K; ++k) coincide += d(k) < kCoincide;
    if (coincide > 0) {
        for (Eigen::Index k = 0; k < K; ++k) out[k] = d(k) < kCoincide ? 1.0 / coincide : 0.0;
        return;
    }
    const double e = 2.0 / (m - 1.0);
    const Vector logd = d.array().log();
    for (Eigen::Index k = 0; k < K; ++k) {
        const Eigen::ArrayXd t = e * (logd(k) - logd.array());
        const double hi = t.maxCoeff();
        out[k] = std::exp(-(hi + std::log((t - hi).exp().sum())));
    }
    double s = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) s += out[k];
    for (Eigen::Index k = 0; k < K; ++k) out[k] /= s;
}

Matrix memberships(const Matrix& X, const Matrix& centroids, double m) {
    Matrix U(X.rows(), centroids.rows());
    Vector row(centroids.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        membership_row(centroids, m, X.row(i), row.data());
        U.row(i) = row.transpose();
    }
    return U;
}

}  // namespace

FcmModel fit_fcm(const Dataset& X, int K, const FcmOptions& opts, RandomSeed seed) {
    if (K < 1 || K > X.n()) throw InvalidArgument("fit_fcm: need 1 <= K <= n");
    if (!(opts.m > 1.0)) throw InvalidArgument("fit_fcm: fuzziness m must exceed 1");
    const Matrix& data = X.matrix();

    FcmModel model;
    model.m = opts.m;
    if (opts.initial_centroids) {
        if (opts.initial_centroids->rows() != K || opts.initial_centroids->cols() != X.p())
            throw InvalidArgument("fit_fcm: initial centroid shape");
        model.centroids = *opts.initial_centroids;
    } else {
        Rng rng(seed);
        model.centroids = detail::kmeanspp_centers(data, K, rng);
    }

    for (int it = 1; it <= opts.max_iter; ++it) {
        const Matrix U = memberships(data, model.centroids, opts.m);
        const Matrix W = U.array().pow(opts.m).matrix();
        const Vector mass = W.colwise().sum().transpose();
        Matrix next = (W.transpose() * data).array().colwise() / mass.array();
        const double shift = (next - model.centroids).rowwise().norm().maxCoeff();
        model.centroids = std::move(next);
        model.iterations = it;
        if (!model.centroids.allFinite()) throw NumericError("fit_fcm: non-finite centroid");
        if (shift < opts.tol) break;
    }

    const Matrix U = memberships(data, model.centroids, opts.m);
    double J = 0.0;
    for (Eigen::Index k = 0; k < model.centroids.rows(); ++k)
        J += (U.col(k).array().pow(opts.m) * (data.rowwise() - model.centroids.row(k)).rowwise().squaredNorm().array())
                 .sum();
    model.objective = J;
    return model;
}

ProbVector fcm_membership(const FcmModel& model, const Vector& x) {
    if (x.size() != model.p()) throw InvalidArgument("fcm_membership: dimension mismatch");
    std::vector<double> u(static_cast<std::size_t>(model.K()));
    membership_row(model.centroids, model.m, x.transpose(), u.data());
    return ProbVector(std::move(u));
}

SoftLabelMatrix fcm_membership(const FcmModel& model, const Dataset& X) {
    if (X.p() != model.p()) throw InvalidArgument("fcm_membership: dimension mismatch");
    return SoftLabelMatrix(memberships(X.matrix(), model.centroids, model.m));
}

}  // namespace confclust
