#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "loocmi/error.hpp"
#include "loocmi/harness.hpp"
#include "loocmi/io.hpp"

using namespace loocmi;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny() {
    ExperimentConfig c;
    c.name = "tiny";
    c.seeds = {1, 2};
    c.sizes = {12, 16, 20};
    c.p = 3;
    c.test_size = 300;
    c.train.model.kind = ModelSpec::Kind::logistic;
    c.train.model.lambda = 0.05;
    c.train.optimizer.eta = 0.5;
    c.train.optimizer.steps = 50;
    c.sigmas = {0.1, 0.2, 0.4};
    return c;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("loocmi-test-" + name);
    fs::remove_all(p);
    return p;
}

SweepPoint point(std::size_t n, double sigma, double gen, double floo = 0.0, double err = 0.0, double se = 0.0) {
    SweepPoint p;
    p.n = n;
    p.sigma = sigma;
    p.gen_bound_predictions = gen;
    p.floo_cmi_mean = floo;
    p.noisy_error = err;
    p.noisy_error_std_err = se;
    return p;
}

bool verdict(const std::vector<Verdict>& vs, const std::string& prefix) {
    for (const auto& v : vs) {
        if (v.name.rfind(prefix, 0) == 0) return v.pass;
    }
    FAIL("no verdict " << prefix);
    return false;
}

}  // namespace

TEST_CASE("config text round trip") {
    ExperimentConfig c = tiny();
    c.weight_noise = WeightNoise::hessian;
    c.damping = 0.25;
    c.train.optimizer.kind = OptimizerSpec::Kind::sgd;
    c.train.optimizer.step_clip = 0.1;
    c.subset = true;
    c.subset_size = 5;
    c.loss = "clipped-ce";
    c.loss_cap = 3.0;
    const std::string text = config_to_text(c);
    const ExperimentConfig back = parse_config(text);
    CHECK(config_to_text(back) == text);
    CHECK(back.weight_noise == WeightNoise::hessian);
    CHECK(*back.train.optimizer.step_clip == 0.1);
    CHECK(back.sizes == std::vector<std::size_t>{12, 16, 20});

    const ExperimentConfig defaults = parse_config("");
    CHECK(config_to_text(defaults) == config_to_text(ExperimentConfig{}));
}

TEST_CASE("config errors carry the line") {
    auto message = [](const std::string& text) {
        try {
            parse_config(text, "exp.cfg");
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK(message("name = a\n# comment\nfoo = 1\n").find("exp.cfg:3") != std::string::npos);
    CHECK(message("n = 10\nn = 20\n").find("exp.cfg:2") != std::string::npos);
    CHECK(message("p = five\n").find("exp.cfg:1") != std::string::npos);
    CHECK(message("no equals sign\n").find("exp.cfg:1") != std::string::npos);
    CHECK(message("optimizer = adam\n") != "no error");
    CHECK(message("sigma = 0.1,,0.2\n") != "no error");

    ExperimentConfig c = tiny();
    c.subset = true;
    c.subset_size = 13;
    CHECK_THROWS_AS(c.validate(), ConfigError);  // s > smallest n
    c = tiny();
    c.sigmas = {0.1, -0.2};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny();
    c.train.model.kind = ModelSpec::Kind::logistic;
    c.train.optimizer.kind = OptimizerSpec::Kind::closed_form;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("list parsing") {
    CHECK(parse_real_list("0.05, 0.1,0.2") == std::vector<double>{0.05, 0.1, 0.2});
    CHECK(parse_size_list("50,100") == std::vector<std::size_t>{50, 100});
    CHECK_THROWS_AS(parse_size_list("50,-1"), ConfigError);
    CHECK_THROWS_AS(parse_real_list(""), ConfigError);
}

TEST_CASE("short_real") {
    CHECK(short_real(0.1) == "0.1");
    CHECK(short_real(0.05) == "0.05");
    CHECK(short_real(2.0) == "2");
}

TEST_CASE("report json layout") {
    const ExperimentConfig c = tiny();
    const PointArtifacts pt = train_point(c, 1, 12);
    const BoundReport r = compute_report(c, pt, 0.2);
    const Json j = report_to_json(r);

    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.push_back(k);
    const std::vector<std::string> expected{
        "units", "experiment", "generator", "seed", "n", "p", "model", "optimizer", "leave_one_out", "loss",
        "noise", "loo_cmi_upper", "floo_cmi_upper", "jensen_upper", "jensen_upper_predictions",
        "gen_bound_weights", "gen_bound_predictions", "stability_bounds", "local_bound", "measured_gap",
        "noisy_test_error", "oracle"};
    CHECK(keys == expected);
    CHECK(j["units"] == "nats");
    CHECK(j["oracle"].is_null());
    CHECK(j["loo_cmi_upper"].is_string());
    CHECK(json_real(j["loo_cmi_upper"]) == *r.loo_cmi_upper);
    CHECK(json_real(j["gen_bound_predictions"]) == *r.gen_bound_predictions);
    CHECK(j["leave_one_out"]["mode"] == "full");
    CHECK(j["loss"]["id"] == "zero-one");
    CHECK(report_to_text(r).back() == '\n');

    // Every bound sits under its ln n cap.
    const double cap = gen_bound_from_cmi(std::log(12.0), 12);
    CHECK(*r.gen_bound_predictions <= cap);
    CHECK(*r.gen_bound_weights <= cap);
    CHECK(*r.loo_cmi_upper <= *r.jensen_weights);
    CHECK(*r.floo_cmi_upper <= *r.jensen_predictions);
}

TEST_CASE("report is independent of thread count") {
    const ExperimentConfig c = tiny();
    const auto a = report_to_text(compute_report(c, train_point(c, 2, 16, 1), 0.1));
    const auto b = report_to_text(compute_report(c, train_point(c, 2, 16, 4), 0.1));
    CHECK(a == b);
}

TEST_CASE("subset mode flags ln(s)") {
    ExperimentConfig c = tiny();
    c.subset = true;
    c.subset_size = 5;
    const PointArtifacts pt = train_point(c, 1, 20);
    CHECK(pt.loo.populated().size() == 5);
    const BoundReport r = compute_report(c, pt, 0.1);
    CHECK(r.subset);
    CHECK(r.loo_rows == 5);
    CHECK(*r.loo_cmi_upper <= std::log(5.0) + 1e-12);
    CHECK(*r.floo_cmi_upper <= std::log(5.0) + 1e-12);
    const Json j = report_to_json(r);
    CHECK(j["leave_one_out"]["mode"] == "subset");
    CHECK(j["leave_one_out"]["rows"] == 5);
}

TEST_CASE("oracle section and sandwich on a trained point") {
    ExperimentConfig c = tiny();
    c.oracle = true;
    c.oracle_samples = 4000;
    const PointArtifacts pt = train_point(c, 1, 12);
    const BoundReport r = compute_report(c, pt, 0.2);
    REQUIRE(r.loo_mc);
    REQUIRE(r.floo_mc);
    CHECK(r.loo_mc->value - 3.0 * r.loo_mc->std_err <= *r.loo_cmi_upper);
    CHECK(r.floo_mc->value - 3.0 * r.floo_mc->std_err <= *r.floo_cmi_upper);
    CHECK(report_to_json(r)["oracle"]["loo_mc"]["samples"] == 4000);
}

TEST_CASE("noisy test error") {
    const ExperimentConfig c = tiny();
    const PointArtifacts pt = train_point(c, 1, 20);
    const NoisyError e0 = noisy_test_error(c, pt, 0.0);
    const BoundReport r = compute_report(c, pt, 0.1);
    CHECK(e0.value == doctest::Approx(r.gap->test_loss).epsilon(1e-12));
    const double m = 300.0;  // per-point losses are 0 or 1: binomial std err
    CHECK(e0.std_err == doctest::Approx(std::sqrt(e0.value * (1.0 - e0.value) / (m - 1.0))).epsilon(1e-12));
    // Same noise draws for every sigma, so huge noise drives toward chance.
    const NoisyError big = noisy_test_error(c, pt, 100.0);
    CHECK(std::abs(big.value - 0.5) < 5.0 * big.std_err + 0.02);
    CHECK(noisy_test_error(c, pt, 0.3).value == noisy_test_error(c, pt, 0.3).value);
}

TEST_CASE("hessian weight noise") {
    ExperimentConfig c = tiny();
    c.weight_noise = WeightNoise::hessian;
    c.weight_sigma = 1.0;
    const PointArtifacts pt = train_point(c, 1, 16);
    const BoundReport r = compute_report(c, pt, 0.1);
    // With s = 1 the weight noise is exactly the local bound's geometry.
    CHECK(*r.loo_cmi_upper == doctest::Approx(r.local->loo_cmi_hessian).epsilon(1e-12));
    CHECK(r.weight_noise.find("inverse") != std::string::npos);
}

TEST_CASE("bound from files") {
    const fs::path dir = scratch("import");
    io::write_file(dir / "w.csv", "index,w0\n0,0\n1,2\n");
    io::write_file(dir / "p.csv", "i,j,p0\n0,0,0\n0,1,0\n1,0,1\n1,1,1\n");
    io::write_file(dir / "p3.csv", "i,j,p0\n0,0,0\n0,1,0\n0,2,0\n");

    ImportOptions o;
    o.weights = dir / "w.csv";
    o.predictions = dir / "p.csv";
    const BoundReport r = bound_from_files(o);
    CHECK(std::abs(*r.loo_cmi_upper - 0.566219169516972813) <= 1e-12);
    CHECK(std::abs(*r.floo_cmi_upper - 0.379885493041722475) <= 1e-12);
    CHECK(std::abs(*r.gen_bound_weights - 1.064160861446212758) <= 1e-12);
    CHECK_FALSE(r.subset);
    CHECK(report_to_json(r)["stability_bounds"].is_null());

    o.predictions = dir / "p3.csv";
    CHECK_THROWS_AS(bound_from_files(o), DomainError);

    // Subset-mode weights: rows 0 and 1 of n = 5.
    ImportOptions s;
    s.weights = dir / "w.csv";
    s.n = 5;
    const BoundReport sub = bound_from_files(s);
    CHECK(sub.subset);
    CHECK(sub.loo_rows == 2);
    CHECK(*sub.loo_cmi_upper == *r.loo_cmi_upper);
    CHECK(*sub.gen_bound_weights == doctest::Approx(1.25 / std::sqrt(2.0) * std::sqrt(*r.loo_cmi_upper)));
    s.n = 1;
    CHECK_THROWS_AS(bound_from_files(s), DomainError);
    CHECK_THROWS_AS(bound_from_files(ImportOptions{}), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("size verdicts") {
    const auto pass = size_verdicts({point(50, 0.1, 0.9), point(100, 0.1, 0.8), point(200, 0.1, 0.7)});
    CHECK(verdict(pass, "floo gen bound non-increasing"));
    const auto one_small = size_verdicts({point(50, 0.1, 0.9), point(100, 0.1, 0.905), point(200, 0.1, 0.7)});
    CHECK(verdict(one_small, "floo gen bound non-increasing"));
    const auto one_big = size_verdicts({point(50, 0.1, 0.9), point(100, 0.1, 0.92), point(200, 0.1, 0.7)});
    CHECK_FALSE(verdict(one_big, "floo gen bound non-increasing"));
    const auto two = size_verdicts(
        {point(50, 0.1, 0.9), point(100, 0.1, 0.901), point(200, 0.1, 0.8), point(400, 0.1, 0.801)});
    CHECK_FALSE(verdict(two, "floo gen bound non-increasing"));
}

TEST_CASE("sigma verdicts") {
    auto pts = [](double f2, double e2) {
        return std::vector<SweepPoint>{point(100, 0.05, 0, 2.0, 0.10, 0.01), point(100, 0.1, 0, f2, e2, 0.01),
                                       point(100, 0.2, 0, 0.5, 0.15, 0.01)};
    };
    CHECK(verdict(sigma_verdicts(pts(1.0, 0.12)), "floo-CMI bound strictly decreasing"));
    CHECK_FALSE(verdict(sigma_verdicts(pts(2.0, 0.12)), "floo-CMI bound strictly decreasing"));
    // Dip of 0.03 against a slack of 3 * sqrt(2) * 0.01 = 0.042.
    CHECK(verdict(sigma_verdicts(pts(1.0, 0.07)), "noisy test error non-decreasing"));
    CHECK_FALSE(verdict(sigma_verdicts(pts(1.0, 0.05)), "noisy test error non-decreasing"));
}

TEST_CASE("sweep preconditions and outputs") {
    ExperimentConfig c = tiny();
    c.seeds = {1};
    CHECK_THROWS_AS(run_sweep(c, Axis::size, {}), ConfigError);
    c = tiny();
    c.sizes = {12, 20};
    CHECK_THROWS_AS(run_sweep(c, Axis::size, {}), ConfigError);
    c.sizes = {20, 12, 16};
    CHECK_THROWS_AS(run_sweep(c, Axis::size, {}), ConfigError);
    c = tiny();
    c.sigmas = {0.1, 0.4, 0.2};
    CHECK_THROWS_AS(run_sweep(c, Axis::sigma, {}), ConfigError);

    c = tiny();
    const fs::path dir = scratch("sweep");
    const SweepResult res = run_sweep(c, Axis::sigma, dir);
    CHECK(res.points.size() == 9);
    for (const auto& p : res.points) {
        CHECK(p.per_seed.size() == 2);
        double mean_root = 0.0;
        for (const auto& r : p.per_seed) mean_root += std::sqrt(*r.floo_cmi_upper);
        mean_root /= 2.0;
        CHECK(p.gen_bound_predictions == doctest::Approx(c_n(p.n) / std::sqrt(2.0) * mean_root).epsilon(1e-14));
    }
    CHECK(fs::exists(dir / "tiny" / "seed-2" / "n-16" / "sigma-0.4" / "report.json"));
    CHECK(fs::exists(dir / "tiny" / "verdicts.csv"));
    CHECK(run_report(dir, dir / "summary") == 18);
    const auto lines = io::read_lines(dir / "summary" / "summary.csv");
    CHECK(lines.size() == 19);
    fs::remove_all(dir);
}

TEST_CASE("failed point aborts with outputs on disk") {
    // Unregularized ridge with p > n is singular at every size.
    ExperimentConfig c = tiny();
    c.generator = "linear-regression";
    c.train.model.kind = ModelSpec::Kind::ridge;
    c.train.model.lambda = 0.0;
    c.train.optimizer.kind = OptimizerSpec::Kind::closed_form;
    c.loss = "clipped-sq";
    c.p = 24;
    const fs::path dir = scratch("partial");
    CHECK_THROWS(run_sweep(c, Axis::size, dir));
    CHECK(fs::exists(dir / "tiny" / "config.txt"));
    CHECK(io::read_lines(dir / "tiny" / "sweep.csv").size() == 1);
    fs::remove_all(dir);
}

TEST_CASE("report scan") {
    const fs::path dir = scratch("scan");
    CHECK_THROWS_AS(run_report(dir, dir), ConfigError);
    fs::create_directories(dir);
    CHECK_THROWS_AS(run_report(dir, dir), ConfigError);
    ImportOptions o;
    io::write_file(dir / "w.csv", "index,w0\n0,0\n1,2\n");
    o.weights = dir / "w.csv";
    write_report(bound_from_files(o), dir / "one" / "report.json");
    CHECK(run_report(dir, dir / "a") == 1);
    CHECK(run_report(dir, dir / "b") == 1);
    CHECK(io::read_lines(dir / "a" / "summary.csv") == io::read_lines(dir / "b" / "summary.csv"));
    CHECK(io::read_lines(dir / "a" / "summary.csv").size() == 2);
    io::write_file(dir / "bad" / "report.json", "{ not json");
    CHECK_THROWS_AS(run_report(dir, dir / "c"), ParseError);
    fs::remove_all(dir);
}

TEST_CASE("mixture instances") {
    for (std::size_t i = 0; i < 100; ++i) {
        const MixtureInstance m = mixture_instance(i);
        CHECK(m.means.rows() >= 2);
        CHECK(m.means.rows() <= 20);
        CHECK(m.means.cols() >= 1);
        CHECK(m.means.cols() <= 4);
    }
    CHECK(mixture_instance(7).means == mixture_instance(7).means);
}

TEST_CASE("verify suites") {
    VerifyOptions o;
    o.oracle_samples = 2000;
    for (const char* s : {"lemma1", "sgd"}) {
        for (const auto& k : run_verify(s, o)) {
            CHECK_MESSAGE(k.pass, k.suite << " " << k.name);
        }
    }
    CHECK_THROWS_AS(run_verify("nope"), ConfigError);
    o.oracle_samples = 10;
    CHECK_THROWS_AS(run_verify("sandwich", o), ConfigError);
}
