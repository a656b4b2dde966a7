#pragma once

#include <cstddef>
#include <span>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace loocmi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// n/(n-1), the sub-Gaussian constant of the leave-one-out statistic.
double c_n(long long n);

/// ln sum_i exp(v_i) with max-shifting. Returns -inf when every entry is -inf.
double log_sum_exp(std::span<const double> values);

/// Covariance of the synthetic Gaussian noise added to weights or predictions.
///
/// Isotropic and diagonal kinds store Sigma itself (sigma is a standard
/// deviation, alpha holds variances). The full kind stores the precision
/// matrix Sigma^{-1} directly, since every bound only ever needs the inverse.
class CovSpec {
public:
    enum class Kind { isotropic, diagonal, full_inverse };

    static CovSpec isotropic(double sigma);
    static CovSpec diagonal(Vector alpha);
    /// Throws DomainError unless `precision` is symmetric positive-definite.
    static CovSpec full_inverse(Matrix precision);

    Kind kind() const noexcept { return kind_; }
    double sigma() const noexcept { return sigma_; }
    const Vector& alpha() const noexcept { return alpha_; }
    const Matrix& precision() const noexcept { return precision_; }

    /// Dimension fixed by the spec, or 0 for isotropic (any dimension).
    std::size_t dim() const noexcept;
    /// Throws DomainError when `k` is incompatible.
    void check_dim(std::size_t k) const;

    /// trace(Sigma) for a K-dimensional space.
    double trace(std::size_t k) const;

    /// (a)^T Sigma^{-1} (a).
    double mahalanobis_sq(const Eigen::Ref<const Vector>& a) const;

    /// Maps x to L^T x with L L^T = Sigma^{-1}, so that Euclidean distances
    /// of whitened points equal Mahalanobis distances of the originals.
    Vector whiten(const Eigen::Ref<const Vector>& x) const;
    Matrix whiten_rows(const Matrix& rows) const;

    /// Same noise with every variance multiplied by factor^2.
    CovSpec scaled(double factor) const;

    std::string describe() const;

private:
    CovSpec() = default;

    Kind kind_ = Kind::isotropic;
    double sigma_ = 1.0;
    Vector alpha_;
    Matrix precision_;
    Matrix chol_lower_;  // L with L L^T = precision_
};

/// Symmetric n x n matrix of pairwise KL divergences (nats), zero diagonal.
class PairwiseKLMatrix {
public:
    explicit PairwiseKLMatrix(Matrix values);

    std::size_t size() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    double operator()(std::size_t i, std::size_t j) const {
        return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    const Matrix& values() const noexcept { return values_; }

private:
    Matrix values_;
};

/// KL(N(mean_a, Sigma) || N(mean_b, Sigma)) = 1/2 (a-b)^T Sigma^{-1} (a-b).
double gaussian_kl(const Eigen::Ref<const Vector>& mean_a, const Eigen::Ref<const Vector>& mean_b,
                   const CovSpec& cov);

/// Entry (i,j) is gaussian_kl(row i, row j). Rows of `means` are the K-vectors.
PairwiseKLMatrix pairwise_kl(const Matrix& means, const CovSpec& cov);

/// Pairwise 1/2 ||a_i - a_j||^2 for already-whitened rows. Index-ascending
/// accumulation, so the result does not depend on scheduling.
PairwiseKLMatrix pairwise_half_sq_dist(const Matrix& whitened);

}  // namespace loocmi
