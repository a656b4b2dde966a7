#include <cmath>
#include <numeric>

#include "doctest.h"
#include "loocmi/bounds.hpp"
#include "loocmi/error.hpp"
#include "loocmi/oracle.hpp"
#include "loocmi/rng.hpp"

using namespace loocmi;

namespace {

Matrix random_means(CounterRng& rng, Eigen::Index n, Eigen::Index k, double spread) {
    Matrix m(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < k; ++c) m(i, c) = spread * rng.normal();
    return m;
}

LooPredictions tensor(const Matrix& rows) {
    LooPredictions p;
    p.d = 1;
    p.n = static_cast<std::size_t>(rows.cols());
    p.values = rows;
    p.rows.resize(static_cast<std::size_t>(rows.rows()));
    std::iota(p.rows.begin(), p.rows.end(), std::size_t{0});
    return p;
}

}  // namespace

TEST_CASE("mc_cmi limits") {
    const McEstimate eq = mc_cmi(Matrix::Constant(5, 2, 0.4), CovSpec::isotropic(1.0), 2000, 1);
    CHECK(eq.std_err >= 0.0);
    CHECK(std::abs(eq.value) <= 3.0 * eq.std_err + 1e-12);

    Matrix sep(2, 1);
    sep << 0.0, 1000.0;
    const McEstimate s = mc_cmi(sep, CovSpec::isotropic(1.0), 2000, 2);
    CHECK(std::abs(s.value - std::log(2.0)) <= 3.0 * s.std_err + 1e-12);

    Matrix fix(2, 1);
    fix << 0.0, 2.0;
    const McEstimate f = mc_cmi(fix, CovSpec::isotropic(1.0), kDefaultOracleSamples, 3);
    CHECK(f.value <= 0.566219169516972813 + 3.0 * f.std_err);
    CHECK(f.samples == kDefaultOracleSamples);
    CHECK(f.seed == 3);

    const McEstimate again = mc_cmi(fix, CovSpec::isotropic(1.0), kDefaultOracleSamples, 3);
    CHECK(again.value == f.value);
    CHECK(again.std_err == f.std_err);

    CHECK_THROWS_AS(mc_cmi(fix, CovSpec::isotropic(1.0), 999, 1), DomainError);
    CHECK_THROWS_AS(mc_cmi(Matrix::Zero(1, 1), CovSpec::isotropic(1.0), 1000, 1), DomainError);
}

TEST_CASE("sandwich and entropy cap") {
    CounterRng rng(404, streams::kVerify);
    for (int trial = 0; trial < 30; ++trial) {
        const auto n = static_cast<Eigen::Index>(2 + rng.below(10));
        const auto k = static_cast<Eigen::Index>(1 + rng.below(4));
        const Matrix m = random_means(rng, n, k, 0.3 + 2.0 * rng.uniform());
        Vector alpha(k);
        for (Eigen::Index c = 0; c < k; ++c) alpha(c) = 0.2 + rng.uniform();
        const CovSpec cov = trial % 2 ? CovSpec::diagonal(alpha) : CovSpec::isotropic(0.5 + rng.uniform());
        const McEstimate est = mc_cmi(m, cov, 2000, static_cast<std::uint64_t>(trial));
        const double up = loo_cmi_upper(m, cov);
        INFO("trial " << trial);
        REQUIRE(est.value - 3.0 * est.std_err <= up);
        REQUIRE(est.value <= std::log(static_cast<double>(n)) + 3.0 * est.std_err);
    }
}

TEST_CASE("mc_floo_cmi") {
    CounterRng rng(505, streams::kVerify);
    const McEstimate same = mc_floo_cmi(tensor(Matrix::Constant(4, 6, 0.25)), 0.5, 2000, 9);
    CHECK(std::abs(same.value) <= 3.0 * same.std_err + 1e-12);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = static_cast<Eigen::Index>(2 + rng.below(6));
        const Matrix rows = random_means(rng, n, n, 0.5);
        const double sigma = 0.2 + rng.uniform();
        const LooPredictions p = tensor(rows);
        const McEstimate est = mc_floo_cmi(p, sigma, 1000, static_cast<std::uint64_t>(trial));
        REQUIRE(est.value <= floo_cmi_upper(p, sigma) + 3.0 * est.std_err);
        REQUIRE(est.value <= std::log(static_cast<double>(n)) + 3.0 * est.std_err);
    }
    LooPredictions broken = tensor(Matrix::Zero(2, 2));
    broken.n = 3;
    CHECK_THROWS_AS(mc_floo_cmi(broken, 1.0, 1000, 1), DomainError);
}

TEST_CASE("MC convergence and separated limit") {
    CounterRng rng(606, streams::kVerify);
    const Matrix m = random_means(rng, 6, 2, 1.0);
    const CovSpec cov = CovSpec::isotropic(1.0);
    const McEstimate a = mc_cmi(m, cov, 4000, 11);
    const McEstimate b = mc_cmi(m, cov, 16000, 11);
    const double ratio = a.std_err / b.std_err;
    CHECK(ratio >= 2.0 / 1.5);
    CHECK(ratio <= 2.0 * 1.5);

    const McEstimate far = mc_cmi(1000.0 * m, cov, 2000, 12);
    CHECK(std::abs(far.value - std::log(6.0)) <= 3.0 * far.std_err + 1e-9);
}

TEST_CASE("exact_loo_ridge") {
    Dataset toy;
    toy.features.resize(2, 1);
    toy.features << 1.0, 2.0;
    toy.labels.resize(2);
    toy.labels << 1.0, 2.0;
    const ExactLoo ex = exact_loo_ridge(toy, 0.0);
    CHECK(ex.flagged.empty());
    CHECK(ex.weights.weights(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ex.weights.weights(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

    // Sample 0 is the only one with a non-zero second coordinate: removing
    // it leaves that direction unidentified, so its leverage is 1.
    Dataset deg;
    deg.features.resize(4, 2);
    deg.features << 1.0, 1.0, 1.0, 0.0, 2.0, 0.0, 3.0, 0.0;
    deg.labels = Vector::LinSpaced(4, 1.0, 4.0);
    const ExactLoo d = exact_loo_ridge(deg, 0.0);
    CHECK(d.flagged == std::vector<std::size_t>{0});
    CHECK_FALSE(d.weights.present[0]);
    CHECK(d.weights.populated().size() == 3);

    CHECK_THROWS_AS(exact_loo_ridge(toy, -1.0), DomainError);
}
