#pragma once

#include "confclust/core.hpp"

namespace confclust::detail {

/// k-means++ D^2 seeding: K rows of X chosen as initial centers.
inline Matrix kmeanspp_centers(const Matrix& X, int K, Rng& rng) {
    const Eigen::Index n = X.rows();
    Matrix centers(K, X.cols());
    centers.row(0) = X.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
    Vector d2 = (X.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (int k = 1; k < K; ++k) {
        const double total = d2.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            const double u = rng.uniform() * total;
            double cum = 0.0;
            pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                cum += d2(i);
                if (u < cum && d2(i) > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
        }
        centers.row(k) = X.row(pick);
        d2 = d2.cwiseMin((X.rowwise() - centers.row(k)).rowwise().squaredNorm());
    }
    return centers;
}

/// n x K one-hot matrix of nearest-center assignments.
inline Matrix nearest_center_responsibilities(const Matrix& X, const Matrix& centers) {
    Matrix R = Matrix::Zero(X.rows(), centers.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        Eigen::Index best = 0;
        (centers.rowwise() - X.row(i)).rowwise().squaredNorm().minCoeff(&best);
        R(i, best) = 1.0;
    }
    return R;
}

}  // namespace confclust::detail
