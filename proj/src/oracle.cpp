#include "loocmi/oracle.hpp"

#include <cmath>

#include "loocmi/error.hpp"
#include "loocmi/rng.hpp"

namespace loocmi {

McEstimate mc_cmi(const Matrix& means, const CovSpec& cov, long long samples, std::uint64_t seed) {
    if (samples < 1000) {
        throw DomainError("mc_cmi needs at least 1000 samples per component");
    }
    const Eigen::Index n = means.rows();
    if (n < 2) {
        throw DomainError("mc_cmi needs at least two components");
    }
    const Matrix a = cov.whiten_rows(means);  // unit-covariance coordinates
    const Eigen::Index k = a.cols();
    const double log_n = std::log(static_cast<double>(n));

    // In whitened coordinates x = a_u + z, and
    // ln p(x|j) - ln p(x|u) = -1/2 ||a_u - a_j||^2 - z.(a_u - a_j).
    // The per-draw contribution is ln n - lse_j of that, so ||z||^2 cancels.
    constexpr Eigen::Index kBlock = 1024;
    double total_mean = 0.0;
    double total_var = 0.0;
    std::vector<double> terms(static_cast<std::size_t>(n));
    for (Eigen::Index u = 0; u < n; ++u) {
        CounterRng rng(seed, streams::kMonteCarlo * 1'000'003ULL + static_cast<std::uint64_t>(u));
        Vector half_d(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            half_d(j) = 0.5 * (a.row(u) - a.row(j)).squaredNorm();
        }
        // Welford accumulation in draw order.
        double mean = 0.0;
        double m2 = 0.0;
        long long count = 0;
        for (long long start = 0; start < samples; start += kBlock) {
            const Eigen::Index rows = static_cast<Eigen::Index>(std::min<long long>(kBlock, samples - start));
            Matrix z(rows, k);
            for (Eigen::Index r = 0; r < rows; ++r) {
                for (Eigen::Index c = 0; c < k; ++c) {
                    z(r, c) = rng.normal();
                }
            }
            const Matrix proj = z * a.transpose();  // rows x n, z . a_j
            for (Eigen::Index r = 0; r < rows; ++r) {
                const double zu = proj(r, u);
                for (Eigen::Index j = 0; j < n; ++j) {
                    terms[static_cast<std::size_t>(j)] = -half_d(j) - (zu - proj(r, j));
                }
                const double contrib = log_n - log_sum_exp(terms);
                ++count;
                const double delta = contrib - mean;
                mean += delta / static_cast<double>(count);
                m2 += delta * (contrib - mean);
            }
        }
        total_mean += mean;
        total_var += m2 / static_cast<double>(count - 1);
    }
    McEstimate est;
    est.value = total_mean / static_cast<double>(n);
    // Stratified: Var = (1/n^2) sum_u s_u^2 / samples.
    est.std_err = std::sqrt(total_var / static_cast<double>(samples)) / static_cast<double>(n);
    est.samples = samples;
    est.seed = seed;
    return est;
}

McEstimate mc_floo_cmi(const LooPredictions& preds, double sigma, long long samples, std::uint64_t seed) {
    if (preds.values.cols() != static_cast<Eigen::Index>(preds.n * preds.d) ||
        preds.values.rows() != static_cast<Eigen::Index>(preds.rows.size())) {
        throw DomainError("mc_floo_cmi: prediction tensor is missing entries");
    }
    return mc_cmi(preds.values, CovSpec::isotropic(sigma), samples, seed);
}

ExactLoo exact_loo_ridge(const Dataset& ds, double lambda) {
    ds.validate();
    if (lambda < 0.0) {
        throw DomainError("exact_loo_ridge: lambda must be >= 0");
    }
    const Matrix& x = ds.features;
    Matrix a = x.transpose() * x;
    a.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) {
        throw NumericalError("exact_loo_ridge: normal equations are singular; set lambda > 0");
    }
    const Vector w_star = llt.solve(x.transpose() * ds.labels);

    ExactLoo out;
    TrainConfig cfg;
    cfg.model.kind = ModelSpec::Kind::ridge;
    cfg.model.lambda = lambda;
    cfg.optimizer.kind = OptimizerSpec::Kind::closed_form;
    out.weights.config = cfg;
    out.weights.feature_dim = ds.dim();
    out.weights.num_classes = ds.num_classes;
    out.weights.full_weights = w_star;
    out.weights.weights = Matrix::Zero(x.rows(), x.cols());
    out.weights.present.assign(ds.size(), false);

    const Matrix ainv_xt = llt.solve(x.transpose());  // p x n, column i = A^{-1} x_i
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double leverage = x.row(i).dot(ainv_xt.col(i));
        const double slack = 1.0 - leverage;
        if (slack < 1e-10) {
            out.flagged.push_back(static_cast<std::size_t>(i));
            continue;
        }
        const double residual = x.row(i).dot(w_star) - ds.labels(i);
        out.weights.weights.row(i) = (w_star + ainv_xt.col(i) * (residual / slack)).transpose();
        out.weights.present[static_cast<std::size_t>(i)] = true;
    }
    return out;
}

}  // namespace loocmi
