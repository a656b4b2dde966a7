#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "loocmi/dataset.hpp"
#include "loocmi/numerics.hpp"

namespace loocmi {

struct ModelSpec {
    enum class Kind { ridge, logistic, mlp };
    Kind kind = Kind::logistic;
    double lambda = 0.0;
    int hidden = 8;  // mlp only; one tanh layer, at most 32 units

    std::string name() const;
};

struct OptimizerSpec {
    enum class Kind { closed_form, full_batch_gd, sgd };
    Kind kind = Kind::full_batch_gd;
    double eta = 0.1;
    int steps = 100;
    int batch = 1;                     // sgd only
    std::optional<double> step_clip;   // sgd only: caps every update norm at sqrt(gamma)
    double momentum = 0.0;             // sgd only; clipping applies to the post-momentum step

    std::string name() const;
};

struct TrainConfig {
    ModelSpec model;
    OptimizerSpec optimizer;
    std::uint64_t init_seed = 0;
    std::uint64_t sgd_order_seed = 0;

    /// Throws ConfigError on inconsistent combinations.
    void validate() const;
};

/// Number of trainable parameters K for a model on p features.
std::size_t param_count(const ModelSpec& model, std::size_t p);

/// Prediction dimension d: class probabilities for classifiers, 1 otherwise.
std::size_t output_dim(const ModelSpec& model, int num_classes);

/// Deterministic starting weights (all-zero for convex models).
Vector initial_weights(const ModelSpec& model, std::size_t p, int num_classes, std::uint64_t init_seed);

/// Model outputs for every row of `x` (m x d).
Matrix predict(const ModelSpec& model, const Vector& w, const Matrix& x, int num_classes);

/// Unregularized loss of one sample: squared error for regression outputs,
/// cross-entropy for classifiers.
double sample_loss(const ModelSpec& model, const Vector& w, const Eigen::Ref<const Vector>& x, double y,
                   int num_classes);

/// Gradient of sample_loss with respect to the weights.
Vector per_sample_gradient(const ModelSpec& model, const Vector& w, const Eigen::Ref<const Vector>& x, double y,
                           int num_classes);

/// Hessian of the mean training objective (1/n)[sum_i loss_i + lambda ||w||^2].
/// Exact for ridge and logistic, Gauss-Newton for the MLP.
Matrix hessian(const ModelSpec& model, const Vector& w, const Dataset& ds);

struct TrainResult {
    Vector weights;
    std::vector<double> update_norms;  // sgd only
};

TrainResult train_detailed(const Matrix& x, const Vector& y, int num_classes, const TrainConfig& config);
Vector train(const Dataset& ds, const TrainConfig& config);
Vector train(const LooView& view, const TrainConfig& config);

/// Row i holds w_{-i}; rows outside the requested subset are absent.
struct LooWeights {
    Matrix weights;                       // n x K
    std::vector<bool> present;            // n
    Vector full_weights;                  // w*, may be empty for imported data
    std::optional<TrainConfig> config;    // unknown for imported data
    std::size_t feature_dim = 0;
    int num_classes = 0;
    double max_update_norm = 0.0;         // sgd only, over every run

    std::size_t n() const noexcept { return static_cast<std::size_t>(weights.rows()); }
    std::size_t k() const noexcept { return static_cast<std::size_t>(weights.cols()); }
    std::vector<std::size_t> populated() const;
    /// Populated rows stacked in ascending index order.
    Matrix populated_rows() const;
};

/// Retrains once per requested index. `threads` = 0 uses the hardware count;
/// the result does not depend on it.
LooWeights train_loo(const Dataset& ds, const TrainConfig& config,
                     const std::optional<std::vector<std::size_t>>& subset = std::nullopt,
                     unsigned threads = 1);

/// s distinct indices drawn deterministically from [0, n), ascending.
std::vector<std::size_t> choose_subset(std::size_t n, std::size_t s, std::uint64_t selection_seed);

/// preds row r corresponds to base index rows[r] and stores
/// h_{-rows[r]}(x_j) for j ascending, each a block of d outputs.
struct LooPredictions {
    std::vector<std::size_t> rows;
    std::size_t n = 0;
    std::size_t d = 0;
    Matrix values;  // rows.size() x (n * d)

    double at(std::size_t r, std::size_t j, std::size_t c) const {
        return values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j * d + c));
    }
};

LooPredictions predict_all(const Dataset& ds, const LooWeights& loo);

/// g_i = (1/n) (H + damping I)^{-1} grad_i for the rows of `grads`.
/// damping < 0 selects the default 1e-4 * trace(H) / K.
Matrix influence_from(const Matrix& hess, const Matrix& grads, std::size_t n, double damping = -1.0);
double default_damping(const Matrix& hess);

/// Influence-function estimates of w*_{-i} - w* for every sample (n x K).
Matrix influence_loo(const Vector& w_star, const Dataset& ds, const ModelSpec& model, double damping = -1.0);

struct SgdTrace {
    std::vector<double> update_norms_i;
    std::vector<double> update_norms_j;
    std::vector<double> divergence;  // delta_t after step t = 1..T
};

/// Runs the sgd configuration on loo_view(ds, i) and loo_view(ds, j) in
/// lockstep from the same start.
SgdTrace sgd_divergence(const Dataset& ds, const TrainConfig& config, std::size_t i, std::size_t j);

/// CSV with header `index,w0,...,w{K-1}`; one row per populated index and a
/// trailing `full` row when w* is known.
std::string loo_weights_to_csv(const LooWeights& loo);
void write_loo_weights_csv(const LooWeights& loo, const std::filesystem::path& path);
LooWeights read_loo_weights_csv(const std::filesystem::path& path);

/// CSV with header `i,j,p0,...,p{d-1}`.
std::string loo_predictions_to_csv(const LooPredictions& preds);
void write_loo_predictions_csv(const LooPredictions& preds, const std::filesystem::path& path);
LooPredictions read_loo_predictions_csv(const std::filesystem::path& path);

}  // namespace loocmi
