#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "loocmi/dataset.hpp"
#include "loocmi/numerics.hpp"
#include "loocmi/trainers.hpp"

namespace loocmi {

struct McEstimate {
    double value = 0.0;    // nats
    double std_err = 0.0;  // nats
    long long samples = 0; // draws per mixture component
    std::uint64_t seed = 0;
};

inline constexpr long long kDefaultOracleSamples = 20000;

/// Monte-Carlo estimate of I(W; U) for the uniform mixture of N(means_u, Sigma),
/// with exactly `samples` draws from every component. Each draw contributes
/// ln p(w|u) - ln((1/n) sum_j p(w|j)), evaluated in the log domain.
McEstimate mc_cmi(const Matrix& means, const CovSpec& cov, long long samples, std::uint64_t seed);

/// mc_cmi on the flattened prediction rows with isotropic sigma.
McEstimate mc_floo_cmi(const LooPredictions& preds, double sigma, long long samples, std::uint64_t seed);

struct ExactLoo {
    LooWeights weights;
    std::vector<std::size_t> flagged;  // leverage-1 samples; their rows are absent
};

/// Ridge leave-one-out solutions by rank-one downdates of one factorization.
ExactLoo exact_loo_ridge(const Dataset& ds, double lambda);

}  // namespace loocmi
