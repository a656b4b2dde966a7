#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "loocmi/numerics.hpp"

namespace loocmi {

enum class Task { classification, regression };

struct GeneratorOptions {
    double blob_mu = 0.5;     // gaussian-blobs: class means at +-mu * 1
    double xor_mu = 2.0;      // xor-blobs: cluster centres at (+-mu, +-mu)
    double noise_std = 0.5;   // linear-regression label noise
};

/// n labelled samples. Classification labels are stored as exact integer
/// class indices in `labels`.
struct Dataset {
    Matrix features;  // n x p
    Vector labels;    // n
    int num_classes = 0;  // 0 for regression
    std::uint64_t seed = 0;
    std::string generator_id;

    std::size_t size() const noexcept { return static_cast<std::size_t>(features.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(features.cols()); }
    Task task() const noexcept { return num_classes > 0 ? Task::classification : Task::regression; }

    /// Throws DomainError on n < 2, non-finite features or labels outside
    /// the label space.
    void validate() const;
};

inline constexpr std::uint64_t kHoldoutSeedOffset = 1'000'003;

/// Known ids: gaussian-blobs, linear-regression, xor-blobs.
Dataset generate(const std::string& generator_id, std::uint64_t seed, std::size_t n, std::size_t p,
                 const GeneratorOptions& opts = {});

/// Fresh i.i.d. draw from the generator's distribution, on a random stream
/// disjoint from every training draw. By convention `holdout_seed` is
/// training seed + kHoldoutSeedOffset.
Dataset holdout_test_set(const std::string& generator_id, std::uint64_t holdout_seed, std::size_t m,
                         std::size_t p, const GeneratorOptions& opts = {});

std::vector<double> regression_coefficients(std::size_t p);

/// The dataset with one sample removed. Borrows `base`, which must outlive it.
class LooView {
public:
    LooView(const Dataset& base, std::size_t removed_index);

    const Dataset& base() const noexcept { return *base_; }
    std::size_t removed_index() const noexcept { return removed_; }
    std::size_t size() const noexcept { return base_->size() - 1; }

    /// Base index of the k-th sample of the view (ascending, removed skipped).
    std::size_t base_index(std::size_t k) const noexcept { return k < removed_ ? k : k + 1; }
    std::vector<std::size_t> indices() const;

    Matrix features() const;
    Vector labels() const;

private:
    const Dataset* base_;
    std::size_t removed_;
};

LooView loo_view(const Dataset& ds, std::size_t u);

/// Header `x0,...,x{p-1},y`, 17 significant digits.
std::string dataset_to_csv(const Dataset& ds);
void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path);

/// num_classes < 0 infers the task: all-integer non-negative labels are
/// read as class indices.
Dataset read_dataset_csv(const std::filesystem::path& path, int num_classes = -1);

}  // namespace loocmi
