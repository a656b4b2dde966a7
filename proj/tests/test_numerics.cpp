#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/LU>

#include "doctest.h"
#include "loocmi/error.hpp"
#include "loocmi/numerics.hpp"
#include "loocmi/rng.hpp"

using namespace loocmi;

TEST_CASE("c_n") {
    CHECK(c_n(2) == 2.0);
    CHECK(c_n(11) == doctest::Approx(1.1).epsilon(1e-15));
    CHECK(c_n(101) == doctest::Approx(1.01).epsilon(1e-15));
    CHECK_THROWS_AS(c_n(1), DomainError);
    CHECK_THROWS_AS(c_n(0), DomainError);

    double prev = c_n(2);
    for (long long n = 3; n < 200; ++n) {
        CHECK(c_n(n) < prev);
        prev = c_n(n);
    }
    // c_n is the correctly rounded quotient: the exact residual c (n-1) - n
    // is at most half an ulp of c times (n-1), and the rounded product lands
    // on n or a neighbouring double.
    for (long long n = 2; n <= 1'000'000; n += (n < 1000 ? 1 : 997)) {
        const double c = c_n(n);
        const double den = static_cast<double>(n - 1);
        const double num = static_cast<double>(n);
        const double residual = std::fma(c, den, -num);
        const double half_ulp_c = 0.5 * (std::nextafter(c, 4.0) - c);
        REQUIRE(std::abs(residual) <= half_ulp_c * den);
        const double prod = c * den;
        REQUIRE((prod == num || prod == std::nextafter(num, 0.0) || prod == std::nextafter(num, 2.0 * num)));
    }
    CHECK(c_n(2) * 1.0 == 2.0);
    CHECK(c_n(11) * 10.0 == 11.0);
}

TEST_CASE("log_sum_exp") {
    const std::vector<double> zeros{0.0, 0.0};
    CHECK(log_sum_exp(zeros) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

    const std::vector<double> far{-1000.0, -1000.0};
    CHECK(log_sum_exp(far) == doctest::Approx(-1000.0 + std::log(2.0)).epsilon(1e-15));

    // ln(1 + e^-2), 30-digit reference
    const std::vector<double> mixed{0.0, -2.0};
    CHECK(std::abs(log_sum_exp(mixed) - 0.126928011042972496) < 1e-15);

    const double inf = std::numeric_limits<double>::infinity();
    const std::vector<double> with_neg_inf{-inf, 1.0};
    CHECK(log_sum_exp(with_neg_inf) == doctest::Approx(1.0));

    CHECK_THROWS_AS(log_sum_exp(std::vector<double>{}), DomainError);

    SUBCASE("shift invariance") {
        CounterRng rng(5, 0);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> v(1 + rng.below(20));
            for (double& x : v) x = 10.0 * rng.normal();
            const double s = 50.0 * rng.normal();
            std::vector<double> shifted = v;
            for (double& x : shifted) x += s;
            REQUIRE(std::abs(log_sum_exp(shifted) - (log_sum_exp(v) + s)) <= 1e-12 * std::max(1.0, std::abs(s)));
        }
    }
}

TEST_CASE("CovSpec construction") {
    CHECK_THROWS_AS(CovSpec::isotropic(0.0), DomainError);
    CHECK_THROWS_AS(CovSpec::isotropic(-1.0), DomainError);
    CHECK_THROWS_AS(CovSpec::diagonal(Vector::Constant(2, 0.0)), DomainError);

    Matrix not_pd(2, 2);
    not_pd << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS(CovSpec::full_inverse(not_pd), DomainError);
    Matrix not_sym(2, 2);
    not_sym << 2.0, 1.0, 0.0, 2.0;
    CHECK_THROWS_AS(CovSpec::full_inverse(not_sym), DomainError);

    Matrix p(2, 2);
    p << 2.0, 0.5, 0.5, 1.0;
    const CovSpec full = CovSpec::full_inverse(p);
    const Matrix sigma = p.inverse();
    CHECK(full.trace(2) == doctest::Approx(sigma.trace()).epsilon(1e-12));
    CHECK(CovSpec::isotropic(0.5).trace(4) == doctest::Approx(1.0));
    Vector alpha(3);
    alpha << 1.0, 2.0, 3.0;
    CHECK(CovSpec::diagonal(alpha).trace(3) == doctest::Approx(6.0));
    CHECK_THROWS_AS(CovSpec::diagonal(alpha).trace(2), DomainError);
}

TEST_CASE("gaussian_kl") {
    Vector a(1), b(1);
    a << 0.0;
    b << 2.0;
    CHECK(gaussian_kl(a, b, CovSpec::isotropic(1.0)) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(gaussian_kl(a, a, CovSpec::isotropic(1.0)) == 0.0);

    Vector a2(2), b2(2), alpha(2);
    a2 << 0.0, 0.0;
    b2 << 2.0, 2.0;
    alpha << 1.0, 4.0;
    CHECK(gaussian_kl(a2, b2, CovSpec::diagonal(alpha)) == doctest::Approx(2.5).epsilon(1e-15));

    CHECK_THROWS_AS(gaussian_kl(a, b2, CovSpec::isotropic(1.0)), DomainError);
    CHECK_THROWS_AS(gaussian_kl(a, b, CovSpec::diagonal(alpha)), DomainError);

    // full-inverse with identity precision equals isotropic sigma = 1
    CHECK(gaussian_kl(a2, b2, CovSpec::full_inverse(Matrix::Identity(2, 2))) == doctest::Approx(4.0));
}

namespace {

Matrix random_means(CounterRng& rng, Eigen::Index n, Eigen::Index k) {
    Matrix m(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < k; ++c) m(i, c) = rng.normal();
    return m;
}

Matrix random_spd(CounterRng& rng, Eigen::Index k) {
    Matrix b = random_means(rng, k, k);
    Matrix p = b * b.transpose();
    p.diagonal().array() += 0.5;
    return p;
}

}  // namespace

TEST_CASE("pairwise_kl") {
    SUBCASE("fixture") {
        Matrix m(2, 1);
        m << 0.0, 2.0;
        const auto kl = pairwise_kl(m, CovSpec::isotropic(1.0));
        CHECK(kl(0, 0) == 0.0);
        CHECK(kl(1, 1) == 0.0);
        CHECK(kl(0, 1) == doctest::Approx(2.0));
        CHECK(kl(1, 0) == doctest::Approx(2.0));
    }
    SUBCASE("all equal") {
        const Matrix m = Matrix::Constant(5, 3, 0.7);
        CHECK(pairwise_kl(m, CovSpec::isotropic(0.1)).values().isZero(0.0));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(pairwise_kl(Matrix::Zero(1, 3), CovSpec::isotropic(1.0)), DomainError);
        CHECK_THROWS_AS(pairwise_kl(Matrix::Zero(3, 3), CovSpec::diagonal(Vector::Ones(2))), DomainError);
    }
    SUBCASE("agrees with gaussian_kl, symmetric, permutation-equivariant") {
        CounterRng rng(17, 0);
        for (int trial = 0; trial < 30; ++trial) {
            const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(8));
            const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.below(5));
            const Matrix m = random_means(rng, n, k);
            Vector alpha(k);
            for (Eigen::Index c = 0; c < k; ++c) alpha(c) = 0.1 + rng.uniform();
            const CovSpec covs[] = {CovSpec::isotropic(0.3 + rng.uniform()), CovSpec::diagonal(alpha),
                                    CovSpec::full_inverse(random_spd(rng, k))};
            for (const auto& cov : covs) {
                const auto kl = pairwise_kl(m, cov);
                for (Eigen::Index i = 0; i < n; ++i) {
                    for (Eigen::Index j = 0; j < n; ++j) {
                        const double direct = gaussian_kl(m.row(i).transpose(), m.row(j).transpose(), cov);
                        REQUIRE(kl(i, j) == doctest::Approx(direct).epsilon(1e-10));
                        REQUIRE(kl(i, j) == kl(j, i));
                        REQUIRE(kl(i, j) >= 0.0);
                    }
                }
                // reverse the rows
                const Matrix rev = m.colwise().reverse();
                const auto klr = pairwise_kl(rev, cov);
                for (Eigen::Index i = 0; i < n; ++i)
                    for (Eigen::Index j = 0; j < n; ++j)
                        REQUIRE(klr(i, j) == doctest::Approx(kl(n - 1 - i, n - 1 - j)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("scale invariance of KL") {
    CounterRng rng(3, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(6));
        const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.below(4));
        const Matrix m = random_means(rng, n, k);
        const double c = 0.01 + 10.0 * rng.uniform();
        Vector alpha(k);
        for (Eigen::Index i = 0; i < k; ++i) alpha(i) = 0.2 + rng.uniform();
        const CovSpec iso = CovSpec::isotropic(0.5 + rng.uniform());
        const CovSpec diag = CovSpec::diagonal(alpha);
        for (const CovSpec* cov : {&iso, &diag}) {
            const auto base = pairwise_kl(m, *cov);
            const auto scaled = pairwise_kl(c * m, cov->scaled(c));
            REQUIRE(scaled.values().isApprox(base.values(), 1e-12));
            const double g0 = gaussian_kl(m.row(0).transpose(), m.row(1).transpose(), *cov);
            const double g1 = gaussian_kl(c * m.row(0).transpose(), c * m.row(1).transpose(), cov->scaled(c));
            REQUIRE(g1 == doctest::Approx(g0).epsilon(1e-12));
        }
    }
}

TEST_CASE("CounterRng is a pure function of (seed, stream, index)") {
    CounterRng a(42, 7);
    CounterRng b(42, 7);
    for (int i = 0; i < 100; ++i) REQUIRE(a.normal() == b.normal());
    CounterRng c(42, 8);
    CHECK(CounterRng(42, 7).at(0) != c.at(0));
    CHECK(CounterRng(43, 7).at(0) != CounterRng(42, 7).at(0));

    // crude moment check of the normal sampler
    CounterRng g(1, 1);
    double s = 0.0, s2 = 0.0;
    const int m = 200000;
    for (int i = 0; i < m; ++i) {
        const double x = g.normal();
        s += x;
        s2 += x * x;
    }
    CHECK(std::abs(s / m) < 0.01);
    CHECK(std::abs(s2 / m - 1.0) < 0.02);
}
