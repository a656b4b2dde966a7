#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace loocmi {

// Counter-based generator: the i-th draw of a stream is a pure function of
// (seed, stream, i). Streams never share state, so leave-one-out retraining,
// test-set generation and Monte-Carlo sampling cannot perturb each other.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_(mix(mix(seed ^ 0x6a09e667f3bcc909ULL) + stream * 0x9e3779b97f4a7c15ULL)) {}

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t at(std::uint64_t index) const noexcept {
        return mix(key_ ^ mix(index + 0x3c6ef372fe94f82bULL));
    }

    std::uint64_t next_u64() noexcept { return at(counter_++); }

    // Uniform on [0, 1).
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) noexcept {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(bound)) % bound;
    }

    // Box-Muller; the spare variate is cached so draws come in pairs.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Stream identifiers. Any new consumer of randomness gets its own id.
namespace streams {
inline constexpr std::uint64_t kFeatures = 1;
inline constexpr std::uint64_t kLabels = 2;
inline constexpr std::uint64_t kHoldout = 3;
inline constexpr std::uint64_t kInit = 10;
inline constexpr std::uint64_t kSgdOrder = 11;
inline constexpr std::uint64_t kSubset = 20;
inline constexpr std::uint64_t kMonteCarlo = 30;
inline constexpr std::uint64_t kPredictionNoise = 31;
inline constexpr std::uint64_t kVerify = 40;
}  // namespace streams

}  // namespace loocmi
