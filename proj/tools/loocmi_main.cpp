// loocmi: leave-one-out CMI bounds from the command line.
//
//   loocmi train-loo --config exp.cfg --out results
//   loocmi bound --weights w.csv --predictions p.csv --sigma 0.1
//   loocmi sweep --config exp.cfg --axis sigma --out results
//   loocmi verify --suite all
//   loocmi report results --out results
//
// Exit status: 0 success, 1 bad input, 2 numerical failure, and for verify
// and sweep 2 + the number of failed checks.

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "loocmi/error.hpp"
#include "loocmi/harness.hpp"
#include "loocmi/io.hpp"

namespace {

using namespace loocmi;

struct Common {
    std::string config;
    std::string out;
    long long oracle_samples = -1;
    unsigned threads = 1;
    std::string sigma;
    std::string sizes;
};

unsigned resolve_threads(unsigned t) {
    if (t != 0) return t;
    return std::max(1u, std::thread::hardware_concurrency());
}

ExperimentConfig load_with_overrides(const Common& c) {
    ExperimentConfig cfg = load_config(c.config);
    if (!c.sigma.empty()) cfg.sigmas = parse_real_list(c.sigma);
    if (!c.sizes.empty()) cfg.sizes = parse_size_list(c.sizes);
    if (c.oracle_samples >= 0) {
        cfg.oracle = c.oracle_samples > 0;
        if (cfg.oracle) cfg.oracle_samples = c.oracle_samples;
    }
    cfg.validate();
    return cfg;
}

int failures_to_status(std::size_t failures) { return failures == 0 ? 0 : 2 + static_cast<int>(failures); }

int cmd_train_loo(const Common& c) {
    const ExperimentConfig cfg = load_with_overrides(c);
    const auto dirs = run_train_loo(cfg, c.out.empty() ? "." : c.out, resolve_threads(c.threads));
    for (const auto& d : dirs) std::cout << d.generic_string() << "\n";
    return 0;
}

int cmd_bound(const Common& c, const ImportOptions& base) {
    ImportOptions opts = base;
    if (!c.sigma.empty()) {
        const auto s = parse_real_list(c.sigma);
        if (s.size() != 1) throw ConfigError("bound takes a single --sigma value");
        opts.sigma = s[0];
    }
    if (!c.sizes.empty()) {
        const auto n = parse_size_list(c.sizes);
        if (n.size() != 1) throw ConfigError("bound takes a single --n value");
        opts.n = n[0];
    }
    if (c.oracle_samples > 0) opts.oracle_samples = c.oracle_samples;
    const BoundReport r = bound_from_files(opts);
    if (c.out.empty()) {
        std::cout << report_to_text(r);
    } else {
        write_report(r, std::filesystem::path(c.out) / "report.json");
    }
    return 0;
}

int cmd_sweep(const Common& c, const std::string& axis_name) {
    const ExperimentConfig cfg = load_with_overrides(c);
    const Axis axis = axis_name == "size" ? Axis::size : Axis::sigma;
    const SweepResult res = run_sweep(cfg, axis, c.out.empty() ? "." : c.out, resolve_threads(c.threads));
    std::size_t failed = 0;
    for (const auto& v : res.verdicts) {
        std::cout << (v.pass ? "PASS " : "FAIL ") << v.name << " (" << v.detail << ")\n";
        failed += !v.pass;
    }
    return failures_to_status(failed);
}

int cmd_verify(const Common& c, const std::string& suite) {
    VerifyOptions opts;
    if (c.oracle_samples > 0) opts.oracle_samples = c.oracle_samples;
    opts.threads = resolve_threads(c.threads);
    const auto checks = run_verify(suite, opts);
    std::size_t failed = 0;
    for (const auto& k : checks) {
        std::printf("%s %-9s %s: measured %s, threshold %s\n", k.pass ? "PASS" : "FAIL", k.suite.c_str(),
                    k.name.c_str(), io::format_double(k.measured).c_str(), io::format_double(k.threshold).c_str());
        failed += !k.pass;
    }
    std::printf("%zu checks, %zu failed\n", checks.size(), failed);
    return failures_to_status(failed);
}

int cmd_report(const Common& c, const std::string& results) {
    const std::string out = c.out.empty() ? results : c.out;
    const std::size_t count = run_report(results, out);
    std::cout << count << " reports summarized into " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Leave-one-out CMI generalization bounds"};
    app.require_subcommand(1);

    Common c;
    ImportOptions import;
    std::string axis = "size";
    std::string suite = "all";
    std::string results;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", c.out, "Output directory");
        sub->add_option("--threads", c.threads, "Worker threads (0 = auto; values do not depend on it)");
    };
    auto add_experiment = [&](CLI::App* sub) {
        sub->add_option("--config", c.config, "Experiment file")->required()->check(CLI::ExistingFile);
        sub->add_option("--sigma", c.sigma, "Prediction noise levels, comma-separated");
        sub->add_option("--n", c.sizes, "Training set sizes, comma-separated");
        sub->add_option("--oracle-samples", c.oracle_samples, "Monte-Carlo samples (0 disables the oracle)");
    };

    auto* train = app.add_subcommand("train-loo", "Train all leave-one-out models and write CSV artifacts");
    add_common(train);
    add_experiment(train);

    auto* bound = app.add_subcommand("bound", "Bounds from imported weights and/or predictions");
    add_common(bound);
    bound->add_option("--weights", import.weights, "Leave-one-out weights CSV")->check(CLI::ExistingFile);
    bound->add_option("--predictions", import.predictions, "Leave-one-out predictions CSV")->check(CLI::ExistingFile);
    bound->add_option("--weight-sigma", import.weight_sigma, "Isotropic weight noise")->check(CLI::PositiveNumber);
    bound->add_option("--sigma", c.sigma, "Isotropic prediction noise");
    bound->add_option("--n", c.sizes, "Dataset size, for subset-mode weights without predictions");
    bound->add_option("--oracle-samples", c.oracle_samples, "Monte-Carlo samples (0 disables the oracle)");
    bound->add_option("--oracle-seed", import.oracle_seed, "Monte-Carlo seed");

    auto* sweep = app.add_subcommand("sweep", "Size or sigma sweep with trend verdicts");
    add_common(sweep);
    add_experiment(sweep);
    sweep->add_option("--axis", axis, "size or sigma")->check(CLI::IsMember({"size", "sigma"}));

    auto* verify = app.add_subcommand("verify", "Run property suites against the oracles");
    add_common(verify);
    verify->add_option("--suite", suite, "lemma1, jensen, sandwich, influence, sgd, dpi or all");
    verify->add_option("--oracle-samples", c.oracle_samples, "Monte-Carlo samples");

    auto* report = app.add_subcommand("report", "Summarize report.json files");
    add_common(report);
    report->add_option("results", results, "Results directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*train) return cmd_train_loo(c);
        if (*bound) return cmd_bound(c, import);
        if (*sweep) return cmd_sweep(c, axis);
        if (*verify) return cmd_verify(c, suite);
        if (*report) return cmd_report(c, results);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 1;
    } catch (const DomainError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 1;
    } catch (const RowError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
