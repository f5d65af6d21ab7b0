#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "confclust/clustering.hpp"
#include "seeding.hpp"

namespace confclust {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kMinWeight = 1e-8;

}  // namespace

std::string to_string(MixtureFamily f) {
    switch (f) {
        case MixtureFamily::GaussianFull: return "gaussian-full";
        case MixtureFamily::GaussianDiag: return "gaussian-diag";
        case MixtureFamily::GammaIndependent: return "gamma-independent";
    }
    return "?";
}

MixtureFamily mixture_family_from_string(const std::string& s) {
    if (s == "gaussian-full") return MixtureFamily::GaussianFull;
    if (s == "gaussian-diag") return MixtureFamily::GaussianDiag;
    if (s == "gamma-independent") return MixtureFamily::GammaIndependent;
    throw InvalidArgument("unknown mixture family '" + s + "'");
}

SoftLabelMatrix::SoftLabelMatrix(Matrix rows) : p_(std::move(rows)) {
    if (p_.rows() < 1 || p_.cols() < 1) throw InvalidArgument("SoftLabelMatrix: empty");
    for (Eigen::Index i = 0; i < p_.rows(); ++i) {
        const Vector r = p_.row(i).transpose();
        ProbVector pv(std::span<const double>(r.data(), static_cast<std::size_t>(r.size())));
        for (int k = 0; k < pv.size(); ++k) p_(i, k) = pv[k];
    }
}

ProbVector SoftLabelMatrix::row(int i) const {
    std::vector<double> v(static_cast<std::size_t>(p_.cols()));
    for (Eigen::Index k = 0; k < p_.cols(); ++k) v[static_cast<std::size_t>(k)] = p_(i, k);
    return ProbVector(std::move(v));
}

//==============================================================================
// MixtureModel
//==============================================================================

MixtureModel::MixtureModel(MixtureFamily family, ProbVector weights, Matrix means, std::vector<Matrix> covariances,
                           Matrix variances, FitLog log)
    : family_(family),
      weights_(std::move(weights)),
      means_(std::move(means)),
      covariances_(std::move(covariances)),
      variances_(std::move(variances)),
      log_(std::move(log)) {
    if (weights_.size() != means_.rows()) throw InvalidArgument("MixtureModel: weights/means size mismatch");
    if (means_.cols() < 1) throw InvalidArgument("MixtureModel: p < 1");
    if (!means_.allFinite()) throw InvalidArgument("MixtureModel: non-finite mean");
    precompute();
}

MixtureModel MixtureModel::gaussian_full(ProbVector weights, Matrix means, std::vector<Matrix> covariances) {
    return MixtureModel(MixtureFamily::GaussianFull, std::move(weights), std::move(means), std::move(covariances), {});
}

MixtureModel MixtureModel::gaussian_diag(ProbVector weights, Matrix means, Matrix variances) {
    return MixtureModel(MixtureFamily::GaussianDiag, std::move(weights), std::move(means), {}, std::move(variances));
}

MixtureModel MixtureModel::gamma(ProbVector weights, Matrix means, Matrix variances) {
    return MixtureModel(MixtureFamily::GammaIndependent, std::move(weights), std::move(means), {},
                        std::move(variances));
}

void MixtureModel::precompute() {
    const int K = this->K();
    const int p = this->p();
    log_norm_.assign(static_cast<std::size_t>(K), 0.0);
    switch (family_) {
        case MixtureFamily::GaussianFull: {
            if (static_cast<int>(covariances_.size()) != K) throw InvalidArgument("MixtureModel: need K covariances");
            chol_lower_.clear();
            for (int k = 0; k < K; ++k) {
                const Matrix& S = covariances_[static_cast<std::size_t>(k)];
                if (S.rows() != p || S.cols() != p) throw InvalidArgument("MixtureModel: covariance shape");
                if (!S.allFinite() || !S.isApprox(S.transpose(), 1e-9))
                    throw InvalidArgument("MixtureModel: covariance not symmetric");
                Eigen::LLT<Matrix> llt(S);
                if (llt.info() != Eigen::Success) throw InvalidArgument("MixtureModel: covariance not positive definite");
                Matrix L = llt.matrixL();
                const double log_det = 2.0 * L.diagonal().array().log().sum();
                log_norm_[static_cast<std::size_t>(k)] = -0.5 * (p * kLog2Pi + log_det);
                chol_lower_.push_back(std::move(L));
            }
            break;
        }
        case MixtureFamily::GaussianDiag: {
            if (variances_.rows() != K || variances_.cols() != p) throw InvalidArgument("MixtureModel: variance shape");
            if (!(variances_.array() > 0.0).all() || !variances_.allFinite())
                throw InvalidArgument("MixtureModel: variances must be positive");
            for (int k = 0; k < K; ++k)
                log_norm_[static_cast<std::size_t>(k)] = -0.5 * (p * kLog2Pi + variances_.row(k).array().log().sum());
            break;
        }
        case MixtureFamily::GammaIndependent: {
            if (variances_.rows() != K || variances_.cols() != p) throw InvalidArgument("MixtureModel: variance shape");
            if (!(means_.array() > 0.0).all()) throw InvalidArgument("MixtureModel: gamma means must be positive");
            if (!(variances_.array() > 0.0).all() || !variances_.allFinite())
                throw InvalidArgument("MixtureModel: variances must be positive");
            shape_ = means_.array().square() / variances_.array();
            scale_ = variances_.array() / means_.array();
            for (int k = 0; k < K; ++k) {
                double c = 0.0;
                for (int j = 0; j < p; ++j) c -= shape_(k, j) * std::log(scale_(k, j)) + std::lgamma(shape_(k, j));
                log_norm_[static_cast<std::size_t>(k)] = c;
            }
            break;
        }
    }
}

double MixtureModel::component_log_density(int k, const Vector& x) const {
    if (x.size() != p()) throw InvalidArgument("component_log_density: dimension mismatch");
    const double c = log_norm_[static_cast<std::size_t>(k)];
    switch (family_) {
        case MixtureFamily::GaussianFull: {
            const Vector d = x - means_.row(k).transpose();
            const Vector z = chol_lower_[static_cast<std::size_t>(k)].triangularView<Eigen::Lower>().solve(d);
            return c - 0.5 * z.squaredNorm();
        }
        case MixtureFamily::GaussianDiag:
            return c - 0.5 * ((x.transpose() - means_.row(k)).array().square() / variances_.row(k).array()).sum();
        case MixtureFamily::GammaIndependent: {
            double s = c;
            for (int j = 0; j < p(); ++j) {
                if (!(x(j) > 0.0)) return -std::numeric_limits<double>::infinity();
                s += (shape_(k, j) - 1.0) * std::log(x(j)) - x(j) / scale_(k, j);
            }
            return s;
        }
    }
    return 0.0;
}

Matrix MixtureModel::log_joint(const Matrix& X) const {
    if (X.cols() != p()) throw InvalidArgument("log_joint: dimension mismatch");
    const Eigen::Index n = X.rows();
    Matrix out(n, K());
    for (int k = 0; k < K(); ++k) {
        const double lw = weights_[k] > 0.0 ? std::log(weights_[k]) : -std::numeric_limits<double>::infinity();
        const double c = log_norm_[static_cast<std::size_t>(k)] + lw;
        switch (family_) {
            case MixtureFamily::GaussianFull: {
                const Matrix D = (X.rowwise() - means_.row(k)).transpose();
                const Matrix Z = chol_lower_[static_cast<std::size_t>(k)].triangularView<Eigen::Lower>().solve(D);
                out.col(k) = (c - 0.5 * Z.colwise().squaredNorm().array()).transpose();
                break;
            }
            case MixtureFamily::GaussianDiag: {
                const Eigen::ArrayXXd z2 =
                    (X.rowwise() - means_.row(k)).array().square().rowwise() / variances_.row(k).array();
                out.col(k) = (c - 0.5 * z2.rowwise().sum()).matrix();
                break;
            }
            case MixtureFamily::GammaIndependent: {
                for (Eigen::Index i = 0; i < n; ++i) out(i, k) = lw + component_log_density(k, X.row(i).transpose());
                break;
            }
        }
    }
    return out;
}

//==============================================================================
// Posterior
//==============================================================================

ProbVector mixture_posterior(const MixtureModel& model, const Vector& x) {
    if (x.size() != model.p()) throw InvalidArgument("mixture_posterior: dimension mismatch");
    std::vector<double> lj(static_cast<std::size_t>(model.K()));
    for (int k = 0; k < model.K(); ++k) {
        const double w = model.weights()[k];
        lj[static_cast<std::size_t>(k)] = (w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity()) +
                                          model.component_log_density(k, x);
    }
    return ProbVector::from_log_weights(lj);
}

namespace {

/// Row-normalizes log joint densities in place; returns the summed log-likelihood.
double normalize_log_rows(Matrix& L) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
        const double hi = L.row(i).maxCoeff();
        if (!std::isfinite(hi)) throw NumericError("all component log-densities are -inf at row " + std::to_string(i));
        const double lse = hi + std::log((L.row(i).array() - hi).exp().sum());
        L.row(i) = (L.row(i).array() - lse).exp();
        total += lse;
    }
    return total;
}

}  // namespace

SoftLabelMatrix mixture_posterior(const MixtureModel& model, const Dataset& X) {
    Matrix L = model.log_joint(X.matrix());
    normalize_log_rows(L);
    return SoftLabelMatrix(std::move(L));
}

//==============================================================================
// EM
//==============================================================================

namespace {

/// Shape a maximizing the gamma likelihood given s = log(mean) - mean(log x) > 0,
/// i.e. the root of log(a) - digamma(a) = s, capped at a_max.
double gamma_shape_mle(double s, double a_max) {
    if (!(s > 1e-14)) return a_max;
    double a = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
    for (int it = 0; it < 100; ++it) {
        const double f = std::log(a) - boost::math::digamma(a) - s;
        const double df = 1.0 / a - boost::math::trigamma(a);
        double next = a - f / df;
        if (!(next > 0.0)) next = 0.5 * a;
        const bool done = std::abs(next - a) <= 1e-14 * a;
        a = next;
        if (done) break;
    }
    return std::min(a, a_max);
}

MixtureModel m_step(const Matrix& X, const Matrix& R, MixtureFamily family, double floor, int iteration,
                    const Matrix* logX) {
    const Eigen::Index n = X.rows();
    const int K = static_cast<int>(R.cols());
    const int p = static_cast<int>(X.cols());
    const Vector Nk = R.colwise().sum().transpose();
    std::vector<double> w(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        w[static_cast<std::size_t>(k)] = Nk(k) / static_cast<double>(n);
        if (w[static_cast<std::size_t>(k)] < kMinWeight)
            throw DegenerateFit("component " + std::to_string(k + 1) + " collapsed to zero weight", iteration);
    }
    Matrix means = (R.transpose() * X).array().colwise() / Nk.array();

    switch (family) {
        case MixtureFamily::GaussianFull: {
            std::vector<Matrix> covs;
            covs.reserve(static_cast<std::size_t>(K));
            for (int k = 0; k < K; ++k) {
                const Matrix D = X.rowwise() - means.row(k);
                Matrix S = (D.transpose() * R.col(k).asDiagonal() * D) / Nk(k);
                S = 0.5 * (S + S.transpose());
                Eigen::SelfAdjointEigenSolver<Matrix> es(S);
                if (es.info() != Eigen::Success)
                    throw DegenerateFit("eigendecomposition failed for component " + std::to_string(k + 1), iteration);
                const Vector ev = es.eigenvalues().cwiseMax(floor);
                Matrix F = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
                covs.push_back(0.5 * (F + F.transpose()));
            }
            return MixtureModel::gaussian_full(ProbVector(std::move(w)), std::move(means), std::move(covs));
        }
        case MixtureFamily::GaussianDiag: {
            Matrix var(K, p);
            for (int k = 0; k < K; ++k) {
                const Eigen::ArrayXXd D2 = (X.rowwise() - means.row(k)).array().square();
                var.row(k) = ((D2.colwise() * R.col(k).array()).colwise().sum() / Nk(k)).cwiseMax(floor);
            }
            return MixtureModel::gaussian_diag(ProbVector(std::move(w)), std::move(means), std::move(var));
        }
        case MixtureFamily::GammaIndependent: {
            const Matrix mean_log = (R.transpose() * *logX).array().colwise() / Nk.array();
            Matrix var(K, p);
            for (int k = 0; k < K; ++k) {
                for (int j = 0; j < p; ++j) {
                    const double mu = means(k, j);
                    const double s = std::log(mu) - mean_log(k, j);
                    const double a = gamma_shape_mle(s, mu * mu / floor);
                    var(k, j) = std::max(mu * mu / a, floor);
                }
            }
            return MixtureModel::gamma(ProbVector(std::move(w)), std::move(means), std::move(var));
        }
    }
    throw InvalidArgument("unknown family");
}

MixtureModel with_log(const MixtureModel& m, FitLog log) {
    return MixtureModel(m.family(), m.weights(), m.means(), m.covariances(), m.variances(), std::move(log));
}

MixtureModel run_em(const Matrix& X, int K, MixtureFamily family, const EmOptions& opts, Rng& rng,
                    const Matrix* logX) {
    Matrix R;
    if (opts.init == EmInit::KMeansPlusPlus) {
        R = detail::nearest_center_responsibilities(X, detail::kmeanspp_centers(X, K, rng));
    } else {
        R.resize(X.rows(), K);
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            for (int k = 0; k < K; ++k) R(i, k) = rng.uniform() + 1e-3;
            R.row(i) /= R.row(i).sum();
        }
    }
    MixtureModel model = m_step(X, R, family, opts.variance_floor, 0, logX);

    FitLog log;
    for (int it = 0;; ++it) {
        R = model.log_joint(X);
        const double ll = normalize_log_rows(R);
        if (!std::isfinite(ll)) throw NumericError("non-finite log-likelihood");
        log.trace.push_back(ll);
        log.log_likelihood = ll;
        log.iterations = it;
        if (it > 0 && ll - log.trace[log.trace.size() - 2] < opts.tol) break;
        if (it >= opts.max_iter) break;
        model = m_step(X, R, family, opts.variance_floor, it + 1, logX);
    }
    return with_log(model, std::move(log));
}

}  // namespace

MixtureModel fit_mixture_em(const Dataset& X, int K, MixtureFamily family, const EmOptions& opts, RandomSeed seed) {
    if (K < 1) throw InvalidArgument("fit_mixture_em: K < 1");
    if (X.n() < K) throw InvalidArgument("fit_mixture_em: fewer points than components");
    if (opts.restarts < 1) throw InvalidArgument("fit_mixture_em: restarts < 1");
    Matrix logX;
    if (family == MixtureFamily::GammaIndependent) {
        if (!(X.matrix().array() > 0.0).all())
            throw InvalidArgument("fit_mixture_em: gamma family requires strictly positive data");
        logX = X.matrix().array().log().matrix();
    }

    std::optional<MixtureModel> best;
    std::optional<DegenerateFit> last_failure;
    for (int r = 0; r < opts.restarts; ++r) {
        Rng rng(seed.child(static_cast<std::uint64_t>(r)));
        try {
            MixtureModel m = run_em(X.matrix(), K, family, opts, rng, logX.size() ? &logX : nullptr);
            if (!best || m.fit_log().log_likelihood > best->fit_log().log_likelihood) best = std::move(m);
        } catch (const DegenerateFit& e) {
            last_failure = e;
        }
    }
    if (!best) throw *last_failure;
    return std::move(*best);
}

}  // namespace confclust
