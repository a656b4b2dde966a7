#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "loocmi/dataset.hpp"
#include "loocmi/numerics.hpp"
#include "loocmi/trainers.hpp"

namespace loocmi {

// Bounded losses in [0, 1]. The generalization bounds only hold for losses in
// that range, so unbounded losses are divided by a cap and clipped.
struct LossSpec {
    enum class Id { zero_one, clipped_ce, clipped_sq };
    Id id = Id::zero_one;
    double cap = 1.0;  // clipped losses only

    std::string name() const;
    bool clipped() const noexcept { return id != Id::zero_one; }

    /// zero-one | clipped-ce | clipped-sq. cap <= 0 picks the default:
    /// 4 ln(#classes) for cross-entropy, 1 for squared error.
    static LossSpec parse(const std::string& name, double cap = 0.0, int num_classes = 2);
};

/// Per-sample losses, every entry in [0, 1].
class LossTable {
public:
    LossTable(std::vector<double> values, std::string loss_id);

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    const std::vector<double>& values() const noexcept { return values_; }
    const std::string& loss_id() const noexcept { return loss_id_; }

private:
    std::vector<double> values_;
    std::string loss_id_;
};

/// Bounded loss of each output row (m x d) against its label.
std::vector<double> bounded_losses(const Matrix& outputs, const Vector& labels, const LossSpec& loss);

/// Mean loss over the other samples minus the loss of sample u.
double loo_cv(const LossTable& losses, std::size_t u);

struct Lemma1Check {
    double max_mgf = 0.0;
    double bound = 0.0;
    bool holds = false;
    std::vector<double> argmax;  // loss vector attaining max_mgf
};

/// Brute-force maximum over the loss grid {0, step, ..., 1}^n of
/// E_u[exp(t * loo_cv)], against exp(t^2 c_n^2 / 8). n in [2, 5].
Lemma1Check verify_lemma1(int n, double t, double grid_step);

/// ln n - (1/n) sum_i ln sum_j exp(-KL_ij).
double cmi_upper_from_kl(const PairwiseKLMatrix& kl);
/// (1/n^2) sum_ij KL_ij, the convexity baseline.
double jensen_from_kl(const PairwiseKLMatrix& kl);

/// Weight-level loo-CMI upper bound over the populated rows. With s < n
/// populated rows ln s replaces ln n.
double loo_cmi_upper(const Matrix& means, const CovSpec& cov);
double loo_cmi_upper(const LooWeights& loo, const CovSpec& cov);

/// Prediction-level bound with isotropic noise sigma on the flattened
/// prediction rows (j ascending, then output coordinate).
double floo_cmi_upper(const LooPredictions& preds, double sigma);

double jensen_cmi_upper(const Matrix& means, const CovSpec& cov);
double jensen_cmi_upper(const LooWeights& loo, const CovSpec& cov);
double jensen_cmi_upper(const LooPredictions& preds, double sigma);

/// (c_n / sqrt 2) sqrt(cmi).
double gen_bound_from_cmi(double cmi, long long n);

struct StabilityProfile {
    double epsilon = 0.0;      // relative weight stability
    double beta = 0.0;         // train stability
    double beta1 = 0.0;        // test stability
    double lipschitz_L = 1.0;
    double gamma = 0.0;
    long long T = 0;
    std::size_t d = 1;         // prediction dimension
    std::size_t k = 1;         // weight dimension, for trace(Sigma)
    // Measured values are maxima over the available leave-one-out pairs, hence
    // lower bounds on the definitional suprema.
    bool empirical = false;

    void validate() const;
};

struct StabilityBounds {
    double thm5 = 0.0;  // sqrt(4 c_n eps L sqrt(tr Sigma))
    double thm6 = 0.0;  // sqrt(4 c_n L sqrt(n d (n beta^2 + 2 beta1^2)))
    long long n = 2;
    long long T = 0;
    double gamma = 0.0;

    /// sqrt(c_n^2 T^2 gamma / sigma^2). Throws DomainError for sigma <= 0.
    double lemma5(double sigma) const;
};

StabilityBounds stability_bounds(const StabilityProfile& profile, const CovSpec& cov, long long n);

/// max over populated pairs of sqrt(a^T Sigma^{-1} a), a = w_{-i} - w_{-j}.
double weight_stability(const LooWeights& loo, const CovSpec& cov);

struct FunctionalStability {
    double beta = 0.0;
    double beta1 = 0.0;
};

/// beta: max ||h_{-i}(x_k) - h_{-j}(x_k)|| over pairs and shared samples
/// k not in {i, j}. beta1: the same over probe inputs (probe rows follow
/// train.rows).
FunctionalStability functional_stability(const LooPredictions& train,
                                         const std::optional<LooPredictions>& probes = std::nullopt);

/// Empirical epsilon, beta and beta1 from retrained weights; probes are fresh
/// inputs for beta1.
StabilityProfile measure_stability(const LooWeights& loo, const CovSpec& cov, const Dataset& ds,
                                   const Matrix& probes);

/// Influence-based bound with Sigma^{-1} = hess:
/// ln n - (1/n) sum_i ln sum_j exp(-1/2 (g_i - g_j)^T H (g_i - g_j)).
double local_bound(const Matrix& influence, const Matrix& hess);

struct GapEstimate {
    double loo_gap = 0.0;          // |mean_u loo_cv(h_{-u}, u)|
    double loo_std_err = 0.0;
    double loo_heldout_loss = 0.0; // mean_u loss of h_{-u} on sample u
    double heldout_gap = 0.0;      // |train loss - test loss| of w*
    double heldout_std_err = 0.0;
    double train_loss = 0.0;
    double test_loss = 0.0;
};

/// The loo-cv part of the gap only needs the prediction tensor.
GapEstimate loo_gap(const LooPredictions& preds, const Dataset& ds, const LossSpec& loss);

GapEstimate measured_gap(const LooWeights& loo, const Dataset& ds, const Dataset& test, const LossSpec& loss);

}  // namespace loocmi
