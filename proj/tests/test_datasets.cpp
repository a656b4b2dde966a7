#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include <Eigen/Cholesky>

#include "doctest.h"
#include "loocmi/dataset.hpp"
#include "loocmi/error.hpp"

using namespace loocmi;

namespace {

bool identical(const Dataset& a, const Dataset& b) {
    return a.features.rows() == b.features.rows() && a.features.cols() == b.features.cols() &&
           (a.features.array() == b.features.array()).all() && (a.labels.array() == b.labels.array()).all() &&
           a.num_classes == b.num_classes;
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "loocmi_test_datasets";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("generate is deterministic and balanced") {
    const Dataset a = generate("gaussian-blobs", 7, 100, 5);
    const Dataset b = generate("gaussian-blobs", 7, 100, 5);
    CHECK(identical(a, b));
    CHECK_FALSE(identical(a, generate("gaussian-blobs", 8, 100, 5)));

    for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
        const Dataset ds = generate("gaussian-blobs", seed, 100, 3);
        const double ones = ds.labels.sum();
        CHECK(ones == 50.0);
        const Dataset odd = generate("xor-blobs", seed, 101, 2);
        const double o = odd.labels.sum();
        CHECK(std::abs(o - (101.0 - o)) <= 1.0);
    }

    CHECK_THROWS_AS(generate("moons", 1, 10, 2), ConfigError);
    CHECK_THROWS_AS(generate("xor-blobs", 1, 10, 1), ConfigError);
    CHECK_THROWS_AS(generate("gaussian-blobs", 1, 1, 2), DomainError);
}

TEST_CASE("linear-regression recovers theta by least squares") {
    const std::size_t p = 2;
    const Dataset ds = generate("linear-regression", 3, 50, p);
    CHECK(identical(ds, generate("linear-regression", 3, 50, p)));
    const auto theta = regression_coefficients(p);

    const Matrix& x = ds.features;
    const Matrix xtx = x.transpose() * x;
    const Eigen::LLT<Matrix> llt(xtx);
    const Vector fit = llt.solve(x.transpose() * ds.labels);
    const double noise = GeneratorOptions{}.noise_std;
    const Matrix cov = noise * noise * llt.solve(Matrix::Identity(p, p));
    for (std::size_t k = 0; k < p; ++k) {
        const double se = std::sqrt(cov(k, k));
        CHECK(std::abs(fit(k) - theta[k]) <= 3.0 * se);
    }
}

TEST_CASE("holdout test set") {
    const Dataset t1 = holdout_test_set("gaussian-blobs", 7 + kHoldoutSeedOffset, 10000, 5);
    CHECK(identical(t1, holdout_test_set("gaussian-blobs", 7 + kHoldoutSeedOffset, 10000, 5)));
    // same seed on the training stream gives different draws
    const Dataset tr = generate("gaussian-blobs", 7, 100, 5);
    const Dataset tt = holdout_test_set("gaussian-blobs", 7, 100, 5);
    CHECK((tr.features.array() != tt.features.array()).all());

    SUBCASE("Bayes rule reaches the analytic error") {
        // Classes at +-0.5 * 1 in p = 5 dims: Bayes rule sign(sum x) errs
        // with probability Phi(-0.5 sqrt 5).
        const std::size_t m = 100000;
        const Dataset t = holdout_test_set("gaussian-blobs", 12345, m, 5);
        std::size_t wrong = 0;
        for (Eigen::Index i = 0; i < t.features.rows(); ++i) {
            const int pred = t.features.row(i).sum() > 0.0 ? 1 : 0;
            wrong += pred != static_cast<int>(t.labels(i));
        }
        const double bayes = 0.131776238641486365;
        const double err = static_cast<double>(wrong) / static_cast<double>(m);
        const double se = std::sqrt(bayes * (1.0 - bayes) / static_cast<double>(m));
        CHECK(std::abs(err - bayes) <= 3.0 * se);
    }
}

TEST_CASE("LooView") {
    const Dataset ds = generate("gaussian-blobs", 1, 3, 2);
    const LooView v = loo_view(ds, 1);
    CHECK(v.size() == 2);
    CHECK(v.indices() == std::vector<std::size_t>{0, 2});
    CHECK(v.features().row(0) == ds.features.row(0));
    CHECK(v.features().row(1) == ds.features.row(2));
    CHECK(v.labels()(1) == ds.labels(2));
    CHECK_THROWS_AS(loo_view(ds, 3), DomainError);

    const Dataset big = generate("linear-regression", 4, 17, 3);
    std::set<std::size_t> omitted;
    for (std::size_t u = 0; u < big.size(); ++u) {
        const LooView view(big, u);
        REQUIRE(view.size() == big.size() - 1);
        auto idx = view.indices();
        REQUIRE(std::is_sorted(idx.begin(), idx.end()));
        REQUIRE(std::find(idx.begin(), idx.end(), u) == idx.end());
        idx.push_back(u);
        std::sort(idx.begin(), idx.end());
        std::vector<std::size_t> all(big.size());
        std::iota(all.begin(), all.end(), 0);
        REQUIRE(idx == all);
        omitted.insert(u);
    }
    CHECK(omitted.size() == big.size());
}

TEST_CASE("dataset CSV round trip") {
    for (const char* id : {"gaussian-blobs", "linear-regression"}) {
        const Dataset ds = generate(id, 11, 25, 3);
        const auto path = scratch(std::string(id) + ".csv");
        write_dataset_csv(ds, path);
        const Dataset back = read_dataset_csv(path);
        CHECK(back.num_classes == ds.num_classes);
        CHECK((back.features.array() == ds.features.array()).all());
        CHECK((back.labels.array() == ds.labels.array()).all());
        CHECK(dataset_to_csv(back) == dataset_to_csv(ds));
    }

    const auto bad = scratch("bad.csv");
    {
        std::ofstream f(bad);
        f << "x0,y\n1.0,0\n2.0,abc\n";
    }
    try {
        read_dataset_csv(bad);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    {
        std::ofstream f(bad);
        f << "x0,x1,y\n1.0,0\n";
    }
    CHECK_THROWS_AS(read_dataset_csv(bad), ParseError);
}
