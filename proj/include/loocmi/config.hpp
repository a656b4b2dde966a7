#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "loocmi/bounds.hpp"
#include "loocmi/dataset.hpp"
#include "loocmi/trainers.hpp"

namespace loocmi {

// Noise on the weights. `hessian` uses Sigma^{-1} = (H + lambda_H I) / s^2
// with H the Hessian of the mean training objective at w* and s =
// weight_sigma, so s = 1 is the plain geometry-aware choice.
enum class WeightNoise { isotropic, hessian };

// One experiment file: `key = value` lines, `#` comments. Lists are
// comma-separated. See fixtures/ for complete examples.
struct ExperimentConfig {
    std::string name = "experiment";

    std::string generator = "gaussian-blobs";
    std::vector<std::uint64_t> seeds{1};
    std::vector<std::size_t> sizes{50};
    std::size_t p = 5;
    GeneratorOptions generator_options;
    std::size_t test_size = 10000;

    TrainConfig train;

    WeightNoise weight_noise = WeightNoise::isotropic;
    double weight_sigma = 0.1;
    std::vector<double> sigmas{0.1};  // isotropic noise on predictions
    double damping = -1.0;            // < 0: 1e-4 tr(H) / K

    std::string loss = "zero-one";
    double loss_cap = 0.0;            // <= 0: the loss's default cap

    bool subset = false;
    std::size_t subset_size = 10;
    std::uint64_t subset_seed = 0;

    bool oracle = false;
    long long oracle_samples = 20000;
    std::uint64_t oracle_seed = 0;

    // Noisy-prediction test error: draws per test point.
    int noise_draws = 20;
    double lipschitz_L = 1.0;

    /// Throws ConfigError.
    void validate() const;
};

ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical `key = value` form; parse_config(config_to_text(c)) == c.
std::string config_to_text(const ExperimentConfig& cfg);

std::vector<double> parse_real_list(const std::string& text);
std::vector<std::size_t> parse_size_list(const std::string& text);

}  // namespace loocmi
