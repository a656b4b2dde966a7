#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "loocmi/bounds.hpp"
#include "loocmi/oracle.hpp"

namespace loocmi {

using Json = nlohmann::ordered_json;

struct StabilitySection {
    StabilityProfile profile;
    StabilityBounds bounds;
    std::optional<double> lemma5;  // sgd with step_clip only
};

struct LocalSection {
    double local_bound = 0.0;
    double loo_cmi_hessian = 0.0;  // retraining bound with the same Sigma^{-1} = H
    double damping = 0.0;
};

struct NoisyError {
    double value = 0.0;
    double std_err = 0.0;
    int draws = 0;
};

/// Everything computed for one (dataset, sigma) point. Optional sections
/// are absent for imported weights that carry no dataset or configuration.
struct BoundReport {
    std::string experiment;
    std::string generator;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    std::size_t p = 0;
    std::size_t loo_rows = 0;      // populated leave-one-out rows
    bool subset = false;           // ln(loo_rows) replaced ln(n)
    std::string model;
    std::string optimizer;

    std::optional<LossSpec> loss;

    std::string weight_noise;      // CovSpec description
    std::optional<double> weight_sigma;
    std::optional<double> prediction_sigma;
    std::optional<double> damping;

    std::optional<double> loo_cmi_upper;
    std::optional<double> jensen_weights;
    std::optional<double> floo_cmi_upper;
    std::optional<double> jensen_predictions;
    std::optional<double> gen_bound_weights;
    std::optional<double> gen_bound_predictions;

    std::optional<StabilitySection> stability;
    std::optional<LocalSection> local;
    std::optional<GapEstimate> gap;
    std::optional<NoisyError> noisy_test_error;

    std::optional<McEstimate> loo_mc;
    std::optional<McEstimate> floo_mc;
};

/// Fixed key order, every real as a 17-significant-digit string, "units"
/// always "nats".
Json report_to_json(const BoundReport& r);
std::string report_to_text(const BoundReport& r);
void write_report(const BoundReport& r, const std::filesystem::path& path);

/// Reads back a real written by report_to_json.
double json_real(const Json& j);

}  // namespace loocmi
