#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "loocmi/config.hpp"
#include "loocmi/report.hpp"

namespace loocmi {

/// Trained state for one (seed, n) point, shared by every sigma.
struct PointArtifacts {
    std::uint64_t seed = 0;
    Dataset data;
    Dataset test;
    LooWeights loo;
    LooPredictions preds;
};

PointArtifacts train_point(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t n, unsigned threads = 1);

/// Bounds, gap, stability, local bound and (if cfg.oracle) the Monte-Carlo
/// oracle for one prediction-noise level.
BoundReport compute_report(const ExperimentConfig& cfg, const PointArtifacts& pt, double sigma);

/// Weight noise implied by the configuration (needs the trained point for
/// the Hessian choice).
CovSpec weight_cov(const ExperimentConfig& cfg, const PointArtifacts& pt);

/// Fraction of test points misclassified by h + sigma z, z ~ N(0, I), with
/// the same z for every sigma. Regression outputs use the configured loss.
NoisyError noisy_test_error(const ExperimentConfig& cfg, const PointArtifacts& pt, double sigma);

/// Bounds from imported CSV files. Either path may be empty.
struct ImportOptions {
    std::filesystem::path weights;
    std::filesystem::path predictions;
    std::size_t n = 0;  // 0: from the predictions file, else the largest weight index + 1
    double weight_sigma = 1.0;
    double sigma = 1.0;
    long long oracle_samples = 0;  // 0 disables the oracle
    std::uint64_t oracle_seed = 0;
};
BoundReport bound_from_files(const ImportOptions& opts);

/// Writes <out>/<name>/seed-S/n-N/{dataset,weights,predictions}.csv and the
/// canonical config. Returns the written point directories.
std::vector<std::filesystem::path> run_train_loo(const ExperimentConfig& cfg, const std::filesystem::path& out,
                                                 unsigned threads = 1);

enum class Axis { size, sigma };

struct SweepPoint {
    std::size_t n = 0;
    double sigma = 0.0;
    std::vector<BoundReport> per_seed;
    // (c_n / sqrt 2) * mean over seeds of sqrt(cmi)
    double gen_bound_predictions = 0.0;
    double gen_bound_weights = 0.0;
    double floo_cmi_mean = 0.0;
    double noisy_error = 0.0;
    double noisy_error_std_err = 0.0;
};

struct Verdict {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct SweepResult {
    Axis axis = Axis::size;
    std::vector<SweepPoint> points;  // n-major, then sigma
    std::vector<Verdict> verdicts;

    bool all_pass() const;
};

/// Trains every (seed, n) point once and evaluates every sigma. With a
/// non-empty `out` the tree <out>/<name>/ receives per-point reports as they
/// complete, then sweep.csv, plot_data.csv and verdicts.csv.
SweepResult run_sweep(const ExperimentConfig& cfg, Axis axis, const std::filesystem::path& out, unsigned threads = 1);

/// Trend checks on the aggregated points.
std::vector<Verdict> size_verdicts(const std::vector<SweepPoint>& points);
std::vector<Verdict> sigma_verdicts(const std::vector<SweepPoint>& points);

struct Check {
    std::string suite;
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double threshold = 0.0;
};

struct VerifyOptions {
    long long oracle_samples = kDefaultOracleSamples;
    unsigned threads = 1;
};

inline const std::vector<std::string>& verify_suites() {
    static const std::vector<std::string> s{"lemma1", "jensen", "sandwich", "influence", "sgd", "dpi"};
    return s;
}

/// One of verify_suites(), or "all". Throws ConfigError for unknown names.
std::vector<Check> run_verify(const std::string& suite, const VerifyOptions& opts = {});

/// Random Gaussian mixture instance `index` of the shared validation set:
/// n in [2, 20], K in [1, 4], covariance kind cycling isotropic, diagonal,
/// full-inverse.
struct MixtureInstance {
    Matrix means;
    CovSpec cov = CovSpec::isotropic(1.0);
};
MixtureInstance mixture_instance(std::size_t index);

/// Median relative error of influence estimates against exact ridge
/// leave-one-out on linear-regression data.
double influence_median_error(std::size_t n, std::uint64_t seed = 31, std::size_t p = 5, double lambda = 0.1);
inline constexpr double kInfluenceThreshold = 0.0334;

/// Scans `results` for report.json files and writes summary.csv and
/// plot_data.csv into `out`. Returns the number of reports.
std::size_t run_report(const std::filesystem::path& results, const std::filesystem::path& out);

/// Shortest round-trip decimal, used in directory names.
std::string short_real(double v);

}  // namespace loocmi
