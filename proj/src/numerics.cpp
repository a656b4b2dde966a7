#include "loocmi/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "loocmi/error.hpp"

namespace loocmi {

double c_n(long long n) {
    if (n < 2) {
        throw DomainError("c_n: leave-one-out needs n >= 2, got " + std::to_string(n));
    }
    return static_cast<double>(n) / static_cast<double>(n - 1);
}

double log_sum_exp(std::span<const double> values) {
    if (values.empty()) {
        throw DomainError("log_sum_exp: empty input");
    }
    const double m = *std::max_element(values.begin(), values.end());
    if (std::isinf(m)) {
        return m;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += std::exp(v - m);
    }
    return m + std::log(sum);
}

CovSpec CovSpec::isotropic(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw DomainError("isotropic noise needs a finite sigma > 0");
    }
    CovSpec c;
    c.kind_ = Kind::isotropic;
    c.sigma_ = sigma;
    return c;
}

CovSpec CovSpec::diagonal(Vector alpha) {
    if (alpha.size() == 0) {
        throw DomainError("diagonal noise needs at least one variance");
    }
    for (Eigen::Index k = 0; k < alpha.size(); ++k) {
        if (!(alpha(k) > 0.0) || !std::isfinite(alpha(k))) {
            throw DomainError("diagonal noise variance alpha_" + std::to_string(k) +
                              " must be finite and > 0");
        }
    }
    CovSpec c;
    c.kind_ = Kind::diagonal;
    c.alpha_ = std::move(alpha);
    return c;
}

CovSpec CovSpec::full_inverse(Matrix precision) {
    if (precision.rows() == 0 || precision.rows() != precision.cols()) {
        throw DomainError("full-inverse noise needs a non-empty square precision matrix");
    }
    if (!precision.allFinite()) {
        throw DomainError("full-inverse precision matrix has non-finite entries");
    }
    const double scale = std::max(1.0, precision.cwiseAbs().maxCoeff());
    if ((precision - precision.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw DomainError("full-inverse precision matrix is not symmetric");
    }
    Eigen::LLT<Matrix> llt(precision);
    if (llt.info() != Eigen::Success) {
        throw DomainError("full-inverse precision matrix is not positive-definite");
    }
    CovSpec c;
    c.kind_ = Kind::full_inverse;
    c.chol_lower_ = llt.matrixL();
    c.precision_ = std::move(precision);
    return c;
}

std::size_t CovSpec::dim() const noexcept {
    switch (kind_) {
        case Kind::isotropic: return 0;
        case Kind::diagonal: return static_cast<std::size_t>(alpha_.size());
        case Kind::full_inverse: return static_cast<std::size_t>(precision_.rows());
    }
    return 0;
}

void CovSpec::check_dim(std::size_t k) const {
    const std::size_t d = dim();
    if (d != 0 && d != k) {
        throw DomainError("noise covariance has dimension " + std::to_string(d) +
                          " but vectors have dimension " + std::to_string(k));
    }
}

double CovSpec::trace(std::size_t k) const {
    check_dim(k);
    switch (kind_) {
        case Kind::isotropic: return static_cast<double>(k) * sigma_ * sigma_;
        case Kind::diagonal: return alpha_.sum();
        case Kind::full_inverse: {
            // trace(P^{-1}) = ||L^{-1}||_F^2
            const Matrix id = Matrix::Identity(precision_.rows(), precision_.cols());
            const Matrix linv = chol_lower_.triangularView<Eigen::Lower>().solve(id);
            return linv.squaredNorm();
        }
    }
    return 0.0;
}

double CovSpec::mahalanobis_sq(const Eigen::Ref<const Vector>& a) const {
    check_dim(static_cast<std::size_t>(a.size()));
    switch (kind_) {
        case Kind::isotropic: return a.squaredNorm() / (sigma_ * sigma_);
        case Kind::diagonal: return (a.array().square() / alpha_.array()).sum();
        case Kind::full_inverse: return a.dot(precision_ * a);
    }
    return 0.0;
}

Vector CovSpec::whiten(const Eigen::Ref<const Vector>& x) const {
    check_dim(static_cast<std::size_t>(x.size()));
    switch (kind_) {
        case Kind::isotropic: return x / sigma_;
        case Kind::diagonal: return (x.array() / alpha_.array().sqrt()).matrix();
        case Kind::full_inverse: return chol_lower_.transpose() * x;
    }
    return x;
}

Matrix CovSpec::whiten_rows(const Matrix& rows) const {
    check_dim(static_cast<std::size_t>(rows.cols()));
    switch (kind_) {
        case Kind::isotropic: return rows / sigma_;
        case Kind::diagonal: {
            const Eigen::RowVectorXd inv_sd = alpha_.array().sqrt().inverse().matrix().transpose();
            return rows.array().rowwise() * inv_sd.array();
        }
        case Kind::full_inverse: return rows * chol_lower_;
    }
    return rows;
}

CovSpec CovSpec::scaled(double factor) const {
    switch (kind_) {
        case Kind::isotropic: return isotropic(sigma_ * factor);
        case Kind::diagonal: return diagonal(alpha_ * (factor * factor));
        case Kind::full_inverse: return full_inverse(precision_ / (factor * factor));
    }
    return *this;
}

std::string CovSpec::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::isotropic: os << "isotropic(sigma=" << sigma_ << ")"; break;
        case Kind::diagonal: os << "diagonal(K=" << alpha_.size() << ")"; break;
        case Kind::full_inverse: os << "full-inverse(K=" << precision_.rows() << ")"; break;
    }
    return os.str();
}

PairwiseKLMatrix::PairwiseKLMatrix(Matrix values) : values_(std::move(values)) {
    if (values_.rows() != values_.cols()) {
        throw DomainError("pairwise KL matrix must be square");
    }
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
        if (values_(i, i) != 0.0) {
            throw DomainError("pairwise KL matrix must have a zero diagonal");
        }
    }
    if ((values_.array() < 0.0).any()) {
        throw DomainError("pairwise KL matrix has negative entries");
    }
}

double gaussian_kl(const Eigen::Ref<const Vector>& mean_a, const Eigen::Ref<const Vector>& mean_b,
                   const CovSpec& cov) {
    if (mean_a.size() != mean_b.size()) {
        throw DomainError("gaussian_kl: mean dimensions differ (" + std::to_string(mean_a.size()) +
                          " vs " + std::to_string(mean_b.size()) + ")");
    }
    const Vector diff = mean_a - mean_b;
    return 0.5 * cov.mahalanobis_sq(diff);
}

PairwiseKLMatrix pairwise_half_sq_dist(const Matrix& whitened) {
    const Eigen::Index n = whitened.rows();
    const Eigen::Index k = whitened.cols();
    Matrix kl = Matrix::Zero(n, n);
    // Row-major copy keeps the inner loop contiguous.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = whitened;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double* a = rows.data() + i * k;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double* b = rows.data() + j * k;
            double acc = 0.0;
            for (Eigen::Index c = 0; c < k; ++c) {
                const double d = a[c] - b[c];
                acc += d * d;
            }
            kl(i, j) = 0.5 * acc;
            kl(j, i) = kl(i, j);
        }
    }
    return PairwiseKLMatrix(std::move(kl));
}

PairwiseKLMatrix pairwise_kl(const Matrix& means, const CovSpec& cov) {
    if (means.rows() < 2) {
        throw DomainError("pairwise_kl needs at least two means");
    }
    if (!means.allFinite()) {
        throw DomainError("pairwise_kl: means contain non-finite values");
    }
    return pairwise_half_sq_dist(cov.whiten_rows(means));
}

}  // namespace loocmi
