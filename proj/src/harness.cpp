#include "loocmi/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "loocmi/error.hpp"
#include "loocmi/io.hpp"
#include "loocmi/rng.hpp"

namespace loocmi {

namespace fs = std::filesystem;

std::string short_real(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

int class_count(const Dataset& ds) { return std::max(2, ds.num_classes); }

TrainConfig seeded(const ExperimentConfig& cfg, std::uint64_t seed) {
    TrainConfig tc = cfg.train;
    tc.init_seed = cfg.train.init_seed + seed;
    tc.sgd_order_seed = cfg.train.sgd_order_seed + seed;
    return tc;
}

double resolve_damping(const ExperimentConfig& cfg, const Matrix& h) {
    return cfg.damping < 0.0 ? default_damping(h) : cfg.damping;
}

fs::path point_dir(const fs::path& root, std::uint64_t seed, std::size_t n) {
    return root / ("seed-" + std::to_string(seed)) / ("n-" + std::to_string(n));
}

void write_artifacts(const PointArtifacts& pt, const fs::path& dir) {
    write_dataset_csv(pt.data, dir / "dataset.csv");
    write_loo_weights_csv(pt.loo, dir / "weights.csv");
    write_loo_predictions_csv(pt.preds, dir / "predictions.csv");
}

bool strictly_increasing(const std::vector<double>& v) {
    return std::adjacent_find(v.begin(), v.end(), std::greater_equal<double>()) == v.end();
}

}  // namespace

PointArtifacts train_point(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t n, unsigned threads) {
    PointArtifacts pt;
    pt.seed = seed;
    pt.data = generate(cfg.generator, seed, n, cfg.p, cfg.generator_options);
    pt.test = holdout_test_set(cfg.generator, seed + kHoldoutSeedOffset, cfg.test_size, cfg.p, cfg.generator_options);
    std::optional<std::vector<std::size_t>> subset;
    if (cfg.subset) {
        subset = choose_subset(n, cfg.subset_size, cfg.subset_seed + seed);
    }
    pt.loo = train_loo(pt.data, seeded(cfg, seed), subset, threads);
    pt.preds = predict_all(pt.data, pt.loo);
    return pt;
}

CovSpec weight_cov(const ExperimentConfig& cfg, const PointArtifacts& pt) {
    if (cfg.weight_noise == WeightNoise::isotropic) {
        return CovSpec::isotropic(cfg.weight_sigma);
    }
    Matrix h = hessian(cfg.train.model, pt.loo.full_weights, pt.data);
    h.diagonal().array() += resolve_damping(cfg, h);
    try {
        return CovSpec::full_inverse(h / (cfg.weight_sigma * cfg.weight_sigma));
    } catch (const DomainError& e) {
        throw NumericalError(std::string("Hessian noise: ") + e.what() + "; increase damping");
    }
}

NoisyError noisy_test_error(const ExperimentConfig& cfg, const PointArtifacts& pt, double sigma) {
    const Matrix out = predict(cfg.train.model, pt.loo.full_weights, pt.test.features, pt.test.num_classes);
    const bool cls = out.cols() >= 2;
    const LossSpec loss = LossSpec::parse(cfg.loss, cfg.loss_cap, class_count(pt.test));
    CounterRng rng(cfg.oracle_seed, streams::kPredictionNoise);
    const auto m = out.rows();
    std::vector<double> per_point(static_cast<std::size_t>(m));
    Matrix noisy(1, out.cols());
    Vector label(1);
    for (Eigen::Index i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int r = 0; r < cfg.noise_draws; ++r) {
            for (Eigen::Index c = 0; c < out.cols(); ++c) noisy(0, c) = out(i, c) + sigma * rng.normal();
            if (cls) {
                Eigen::Index arg = 0;
                noisy.row(0).maxCoeff(&arg);
                acc += static_cast<double>(arg) == pt.test.labels(i) ? 0.0 : 1.0;
            } else {
                label(0) = pt.test.labels(i);
                acc += bounded_losses(noisy, label, loss)[0];
            }
        }
        per_point[static_cast<std::size_t>(i)] = acc / cfg.noise_draws;
    }
    NoisyError e;
    e.draws = cfg.noise_draws;
    double mean = 0.0;
    for (double v : per_point) mean += v;
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (double v : per_point) var += (v - mean) * (v - mean);
    var /= static_cast<double>(std::max<Eigen::Index>(1, m - 1));
    e.value = mean;
    e.std_err = std::sqrt(var / static_cast<double>(m));
    return e;
}

BoundReport compute_report(const ExperimentConfig& cfg, const PointArtifacts& pt, double sigma) {
    const auto& loo = pt.loo;
    const auto& model = cfg.train.model;
    const auto n = static_cast<long long>(pt.data.size());

    BoundReport r;
    r.experiment = cfg.name;
    r.generator = cfg.generator;
    r.seed = pt.seed;
    r.n = pt.data.size();
    r.p = pt.data.dim();
    r.loo_rows = loo.populated().size();
    r.subset = r.loo_rows < r.n;
    r.model = model.name();
    r.optimizer = cfg.train.optimizer.name();
    r.loss = LossSpec::parse(cfg.loss, cfg.loss_cap, class_count(pt.data));

    const CovSpec cov = weight_cov(cfg, pt);
    r.weight_noise = cov.describe();
    r.weight_sigma = cfg.weight_sigma;
    r.prediction_sigma = sigma;

    r.loo_cmi_upper = loo_cmi_upper(loo, cov);
    r.jensen_weights = jensen_cmi_upper(loo, cov);
    r.floo_cmi_upper = floo_cmi_upper(pt.preds, sigma);
    r.jensen_predictions = jensen_cmi_upper(pt.preds, sigma);
    r.gen_bound_weights = gen_bound_from_cmi(*r.loo_cmi_upper, n);
    r.gen_bound_predictions = gen_bound_from_cmi(*r.floo_cmi_upper, n);

    r.gap = measured_gap(loo, pt.data, pt.test, *r.loss);

    {
        const Eigen::Index probes = std::min<Eigen::Index>(200, pt.test.features.rows());
        StabilitySection st;
        st.profile = measure_stability(loo, cov, pt.data, pt.test.features.topRows(probes));
        st.profile.lipschitz_L = cfg.lipschitz_L;
        const auto& opt = cfg.train.optimizer;
        const bool bounded_sgd = opt.kind == OptimizerSpec::Kind::sgd && opt.step_clip.has_value();
        if (bounded_sgd) {
            st.profile.T = opt.steps;
            st.profile.gamma = *opt.step_clip * *opt.step_clip;
        }
        st.bounds = stability_bounds(st.profile, cov, n);
        if (bounded_sgd) {
            st.lemma5 = st.bounds.lemma5(cfg.weight_sigma);
        }
        r.stability = st;
    }

    {
        Matrix h = hessian(model, loo.full_weights, pt.data);
        const double lam = resolve_damping(cfg, h);
        Matrix grads(static_cast<Eigen::Index>(pt.data.size()), loo.full_weights.size());
        for (Eigen::Index i = 0; i < grads.rows(); ++i) {
            grads.row(i) = per_sample_gradient(model, loo.full_weights, pt.data.features.row(i).transpose(),
                                               pt.data.labels(i), pt.data.num_classes)
                               .transpose();
        }
        const Matrix g_all = influence_from(h, grads, pt.data.size(), lam);
        const auto rows = loo.populated();
        Matrix g(static_cast<Eigen::Index>(rows.size()), g_all.cols());
        for (std::size_t k = 0; k < rows.size(); ++k) g.row(static_cast<Eigen::Index>(k)) = g_all.row(static_cast<Eigen::Index>(rows[k]));
        h.diagonal().array() += lam;
        LocalSection ls;
        ls.damping = lam;
        ls.local_bound = local_bound(g, h);
        ls.loo_cmi_hessian = loo_cmi_upper(loo, CovSpec::full_inverse(h));
        r.local = ls;
        r.damping = lam;
    }

    r.noisy_test_error = noisy_test_error(cfg, pt, sigma);

    if (cfg.oracle) {
        r.loo_mc = mc_cmi(loo.populated_rows(), cov, cfg.oracle_samples, cfg.oracle_seed);
        r.floo_mc = mc_floo_cmi(pt.preds, sigma, cfg.oracle_samples, cfg.oracle_seed);
    }
    return r;
}

BoundReport bound_from_files(const ImportOptions& opts) {
    if (opts.weights.empty() && opts.predictions.empty()) {
        throw ConfigError("bound needs a weights file, a predictions file, or both");
    }
    std::optional<LooWeights> loo;
    std::optional<LooPredictions> preds;
    if (!opts.weights.empty()) loo = read_loo_weights_csv(opts.weights);
    if (!opts.predictions.empty()) preds = read_loo_predictions_csv(opts.predictions);

    // A subset-mode weights file only reveals its largest index, so n comes
    // from the predictions file or the caller when either is available.
    std::size_t n = opts.n != 0 ? opts.n : preds ? preds->n : loo->n();
    if (preds && preds->n != n) {
        throw DomainError("predictions describe n = " + std::to_string(preds->n) + ", expected " + std::to_string(n));
    }
    if (loo && loo->n() > n) {
        throw DomainError("weights file has row " + std::to_string(loo->n() - 1) + " but n = " + std::to_string(n));
    }

    BoundReport r;
    r.experiment = "import";
    r.generator = "csv";
    r.n = n;
    const auto nn = static_cast<long long>(n);
    if (loo) {
        const CovSpec cov = CovSpec::isotropic(opts.weight_sigma);
        r.p = loo->k();
        r.loo_rows = loo->populated().size();
        r.weight_noise = cov.describe();
        r.weight_sigma = opts.weight_sigma;
        r.loo_cmi_upper = loo_cmi_upper(*loo, cov);
        r.jensen_weights = jensen_cmi_upper(*loo, cov);
        r.gen_bound_weights = gen_bound_from_cmi(*r.loo_cmi_upper, nn);
        if (opts.oracle_samples > 0) {
            r.loo_mc = mc_cmi(loo->populated_rows(), cov, opts.oracle_samples, opts.oracle_seed);
        }
    }
    if (preds) {
        if (loo && loo->populated().size() != preds->rows.size()) {
            throw DomainError("weights and predictions cover different numbers of removed samples");
        }
        r.loo_rows = preds->rows.size();
        r.prediction_sigma = opts.sigma;
        r.floo_cmi_upper = floo_cmi_upper(*preds, opts.sigma);
        r.jensen_predictions = jensen_cmi_upper(*preds, opts.sigma);
        r.gen_bound_predictions = gen_bound_from_cmi(*r.floo_cmi_upper, nn);
        if (opts.oracle_samples > 0) {
            r.floo_mc = mc_floo_cmi(*preds, opts.sigma, opts.oracle_samples, opts.oracle_seed);
        }
    }
    r.subset = r.loo_rows < r.n;
    return r;
}

std::vector<fs::path> run_train_loo(const ExperimentConfig& cfg, const fs::path& out, unsigned threads) {
    cfg.validate();
    const fs::path root = out / cfg.name;
    io::write_file(root / "config.txt", config_to_text(cfg));
    std::vector<fs::path> dirs;
    for (std::uint64_t seed : cfg.seeds) {
        for (std::size_t n : cfg.sizes) {
            const PointArtifacts pt = train_point(cfg, seed, n, threads);
            const fs::path dir = point_dir(root, seed, n);
            write_artifacts(pt, dir);
            dirs.push_back(dir);
        }
    }
    return dirs;
}

bool SweepResult::all_pass() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

namespace {

SweepPoint aggregate(std::size_t n, double sigma, std::vector<BoundReport> reports) {
    SweepPoint pt;
    pt.n = n;
    pt.sigma = sigma;
    const double s = static_cast<double>(reports.size());
    double root_f = 0.0, root_w = 0.0, floo = 0.0, err = 0.0, var = 0.0;
    for (const auto& r : reports) {
        root_f += std::sqrt(*r.floo_cmi_upper);
        root_w += std::sqrt(*r.loo_cmi_upper);
        floo += *r.floo_cmi_upper;
        err += r.noisy_test_error->value;
        var += r.noisy_test_error->std_err * r.noisy_test_error->std_err;
    }
    const double scale = c_n(static_cast<long long>(n)) / std::sqrt(2.0);
    pt.gen_bound_predictions = scale * root_f / s;
    pt.gen_bound_weights = scale * root_w / s;
    pt.floo_cmi_mean = floo / s;
    pt.noisy_error = err / s;
    pt.noisy_error_std_err = std::sqrt(var) / s;
    pt.per_seed = std::move(reports);
    return pt;
}

Verdict cap_verdict(const std::vector<SweepPoint>& points) {
    Verdict v;
    v.name = "gen bounds within the (c_n/sqrt2) sqrt(ln rows) cap";
    v.pass = true;
    double worst = -1e300;
    for (const auto& p : points) {
        for (const auto& r : p.per_seed) {
            const double cap = gen_bound_from_cmi(std::log(static_cast<double>(r.loo_rows)), static_cast<long long>(r.n));
            worst = std::max({worst, *r.gen_bound_predictions - cap, *r.gen_bound_weights - cap});
        }
    }
    v.pass = worst <= 1e-12;
    v.detail = "max excess " + io::format_double(worst);
    return v;
}

std::map<double, std::vector<const SweepPoint*>> by_sigma(const std::vector<SweepPoint>& points) {
    std::map<double, std::vector<const SweepPoint*>> out;
    for (const auto& p : points) out[p.sigma].push_back(&p);
    for (auto& [s, v] : out) std::sort(v.begin(), v.end(), [](auto* a, auto* b) { return a->n < b->n; });
    return out;
}

std::map<std::size_t, std::vector<const SweepPoint*>> by_size(const std::vector<SweepPoint>& points) {
    std::map<std::size_t, std::vector<const SweepPoint*>> out;
    for (const auto& p : points) out[p.n].push_back(&p);
    for (auto& [n, v] : out) std::sort(v.begin(), v.end(), [](auto* a, auto* b) { return a->sigma < b->sigma; });
    return out;
}

}  // namespace

std::vector<Verdict> size_verdicts(const std::vector<SweepPoint>& points) {
    std::vector<Verdict> out;
    for (const auto& [sigma, seq] : by_sigma(points)) {
        Verdict v;
        v.name = "floo gen bound non-increasing in n (sigma=" + short_real(sigma) + ")";
        int inversions = 0;
        double worst = 0.0;
        for (std::size_t k = 1; k < seq.size(); ++k) {
            const double rise = seq[k]->gen_bound_predictions - seq[k - 1]->gen_bound_predictions;
            if (rise > 0.0) {
                ++inversions;
                worst = std::max(worst, rise);
            }
        }
        v.pass = inversions == 0 || (inversions == 1 && worst <= 0.01);
        v.detail = std::to_string(inversions) + " inversions; largest rise " + io::format_double(worst);
        out.push_back(v);
    }
    out.push_back(cap_verdict(points));
    return out;
}

std::vector<Verdict> sigma_verdicts(const std::vector<SweepPoint>& points) {
    std::vector<Verdict> out;
    for (const auto& [n, seq] : by_size(points)) {
        Verdict dec;
        dec.name = "floo-CMI bound strictly decreasing in sigma (n=" + std::to_string(n) + ")";
        dec.pass = true;
        double worst_step = -1e300;
        for (std::size_t k = 1; k < seq.size(); ++k) {
            const double step = seq[k]->floo_cmi_mean - seq[k - 1]->floo_cmi_mean;
            worst_step = std::max(worst_step, step);
            dec.pass = dec.pass && step < 0.0;
        }
        dec.detail = "largest step " + io::format_double(worst_step);
        out.push_back(dec);

        Verdict err;
        err.name = "noisy test error non-decreasing in sigma within 3 std err (n=" + std::to_string(n) + ")";
        err.pass = true;
        double worst_drop = 0.0;
        for (std::size_t k = 1; k < seq.size(); ++k) {
            const double drop = seq[k - 1]->noisy_error - seq[k]->noisy_error;
            const double se = std::hypot(seq[k - 1]->noisy_error_std_err, seq[k]->noisy_error_std_err);
            worst_drop = std::max(worst_drop, drop - 3.0 * se);
            err.pass = err.pass && drop <= 3.0 * se;
        }
        err.detail = "largest drop beyond slack " + io::format_double(worst_drop);
        out.push_back(err);
    }
    out.push_back(cap_verdict(points));
    return out;
}

namespace {

std::string sweep_csv(const std::vector<SweepPoint>& points) {
    std::string s = "n,sigma,seeds,floo_cmi_mean,gen_bound_predictions,gen_bound_weights,noisy_error,noisy_error_std_err\n";
    for (const auto& p : points) {
        s += std::to_string(p.n) + "," + io::format_double(p.sigma) + "," + std::to_string(p.per_seed.size()) + "," +
             io::format_double(p.floo_cmi_mean) + "," + io::format_double(p.gen_bound_predictions) + "," +
             io::format_double(p.gen_bound_weights) + "," + io::format_double(p.noisy_error) + "," +
             io::format_double(p.noisy_error_std_err) + "\n";
    }
    return s;
}

std::string sweep_plot(const std::vector<SweepPoint>& points, Axis axis) {
    std::string s = "x,y,series\n";
    for (const auto& p : points) {
        if (axis == Axis::size) {
            const std::string tag = " sigma=" + short_real(p.sigma);
            s += std::to_string(p.n) + "," + io::format_double(p.gen_bound_predictions) + ",floo_gen_bound" + tag + "\n";
            s += std::to_string(p.n) + "," + io::format_double(p.gen_bound_weights) + ",loo_gen_bound" + tag + "\n";
        } else {
            const std::string tag = " n=" + std::to_string(p.n);
            s += io::format_double(p.sigma) + "," + io::format_double(p.floo_cmi_mean) + ",floo_cmi" + tag + "\n";
            s += io::format_double(p.sigma) + "," + io::format_double(p.noisy_error) + ",noisy_test_error" + tag + "\n";
        }
    }
    return s;
}

std::string verdict_csv(const std::vector<Verdict>& verdicts) {
    std::string s = "verdict,pass,detail\n";
    for (const auto& v : verdicts) s += v.name + "," + (v.pass ? "true" : "false") + "," + v.detail + "\n";
    return s;
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& cfg, Axis axis, const fs::path& out, unsigned threads) {
    cfg.validate();
    if (cfg.seeds.size() < 2) {
        throw ConfigError("a sweep needs at least 2 seeds");
    }
    std::vector<double> sizes(cfg.sizes.begin(), cfg.sizes.end());
    if (axis == Axis::size && (sizes.size() < 3 || !strictly_increasing(sizes))) {
        throw ConfigError("size sweep needs at least 3 strictly increasing n values");
    }
    if (axis == Axis::sigma && (cfg.sigmas.size() < 3 || !strictly_increasing(cfg.sigmas))) {
        throw ConfigError("sigma sweep needs at least 3 strictly increasing sigma values");
    }
    const fs::path root = out.empty() ? fs::path() : out / cfg.name;
    if (!root.empty()) {
        io::write_file(root / "config.txt", config_to_text(cfg));
    }

    SweepResult result;
    result.axis = axis;
    try {
        for (std::size_t n : cfg.sizes) {
            std::vector<std::vector<BoundReport>> per_sigma(cfg.sigmas.size());
            for (std::uint64_t seed : cfg.seeds) {
                const PointArtifacts pt = train_point(cfg, seed, n, threads);
                if (!root.empty()) write_artifacts(pt, point_dir(root, seed, n));
                for (std::size_t k = 0; k < cfg.sigmas.size(); ++k) {
                    BoundReport r = compute_report(cfg, pt, cfg.sigmas[k]);
                    if (!root.empty()) {
                        write_report(r, point_dir(root, seed, n) / ("sigma-" + short_real(cfg.sigmas[k])) / "report.json");
                    }
                    per_sigma[k].push_back(std::move(r));
                }
            }
            for (std::size_t k = 0; k < cfg.sigmas.size(); ++k) {
                result.points.push_back(aggregate(n, cfg.sigmas[k], std::move(per_sigma[k])));
            }
        }
    } catch (...) {
        if (!root.empty()) io::write_file(root / "sweep.csv", sweep_csv(result.points));
        throw;
    }
    result.verdicts = axis == Axis::size ? size_verdicts(result.points) : sigma_verdicts(result.points);
    if (!root.empty()) {
        io::write_file(root / "sweep.csv", sweep_csv(result.points));
        io::write_file(root / "plot_data.csv", sweep_plot(result.points, axis));
        io::write_file(root / "verdicts.csv", verdict_csv(result.verdicts));
    }
    return result;
}

MixtureInstance mixture_instance(std::size_t index) {
    CounterRng rng(0x5eed, streams::kVerify * 1'000'003ULL + index);
    const auto n = static_cast<Eigen::Index>(2 + rng.below(19));
    const auto k = static_cast<Eigen::Index>(1 + rng.below(4));
    const double spread = 0.2 + 2.5 * rng.uniform();
    MixtureInstance inst;
    inst.means.resize(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < k; ++c) inst.means(i, c) = spread * rng.normal();
    switch (index % 3) {
        case 0: inst.cov = CovSpec::isotropic(0.3 + rng.uniform()); break;
        case 1: {
            Vector alpha(k);
            for (Eigen::Index c = 0; c < k; ++c) alpha(c) = 0.1 + rng.uniform();
            inst.cov = CovSpec::diagonal(alpha);
            break;
        }
        default: {
            Matrix b(k, k);
            for (Eigen::Index i = 0; i < k; ++i)
                for (Eigen::Index c = 0; c < k; ++c) b(i, c) = rng.normal();
            Matrix prec = b * b.transpose();
            prec.diagonal().array() += 0.5;
            inst.cov = CovSpec::full_inverse(prec);
            break;
        }
    }
    return inst;
}

double influence_median_error(std::size_t n, std::uint64_t seed, std::size_t p, double lambda) {
    const Dataset ds = generate("linear-regression", seed, n, p);
    const ExactLoo exact = exact_loo_ridge(ds, lambda);
    ModelSpec model;
    model.kind = ModelSpec::Kind::ridge;
    model.lambda = lambda;
    const Vector& w = exact.weights.full_weights;
    const Matrix g = influence_loo(w, ds, model);
    std::vector<double> err;
    for (std::size_t i : exact.weights.populated()) {
        const auto r = static_cast<Eigen::Index>(i);
        const Vector truth = exact.weights.weights.row(r).transpose() - w;
        err.push_back((g.row(r).transpose() - truth).norm() / truth.norm());
    }
    std::sort(err.begin(), err.end());
    const std::size_t m = err.size() / 2;
    return err.size() % 2 ? err[m] : 0.5 * (err[m - 1] + err[m]);
}

namespace {

Check make_check(const std::string& suite, const std::string& name, bool pass, double measured, double threshold) {
    return Check{suite, name, pass, measured, threshold};
}

void suite_lemma1(std::vector<Check>& out) {
    for (int n : {2, 3, 4}) {
        for (double t : {0.5, 1.0, 2.0, 4.0}) {
            const Lemma1Check r = verify_lemma1(n, t, 0.05);
            out.push_back(make_check("lemma1", "max MGF <= exp(t^2 c_n^2/8) n=" + std::to_string(n) + " t=" + short_real(t),
                                     r.holds, r.max_mgf, r.bound));
        }
    }
    const Lemma1Check base = verify_lemma1(2, 1.0, 0.05);
    const double diff = std::abs(base.max_mgf - std::cosh(1.0));
    out.push_back(make_check("lemma1", "n=2 t=1 maximum equals cosh(1)", diff <= 1e-6, diff, 1e-6));
}

void suite_jensen(std::vector<Check>& out) {
    int violations = 0;
    int not_strict = 0;
    double worst = -1e300;
    for (std::size_t i = 0; i < 100; ++i) {
        const MixtureInstance inst = mixture_instance(i);
        const PairwiseKLMatrix kl = pairwise_kl(inst.means, inst.cov);
        const double tf = cmi_upper_from_kl(kl);
        const double jf = jensen_from_kl(kl);
        worst = std::max(worst, tf - jf);
        violations += tf > jf;
        const bool constant = kl.values().maxCoeff() == kl.values().minCoeff();
        not_strict += !constant && !(tf < jf);
    }
    out.push_back(make_check("jensen", "pairwise bound <= Jensen form on 100 instances (violations)", violations == 0,
                             violations, 0));
    out.push_back(make_check("jensen", "strict on non-constant KL instances (non-strict count)", not_strict == 0,
                             not_strict, 0));
    out.push_back(make_check("jensen", "largest pairwise bound minus Jensen", worst <= 0.0, worst, 0.0));
}

void suite_sandwich(std::vector<Check>& out, long long samples) {
    int lower = 0;
    int upper = 0;
    int cap = 0;
    double worst = -1e300;
    for (std::size_t i = 0; i < 100; ++i) {
        const MixtureInstance inst = mixture_instance(i);
        const double up = loo_cmi_upper(inst.means, inst.cov);
        const McEstimate mc = mc_cmi(inst.means, inst.cov, samples, i);
        const double ln_n = std::log(static_cast<double>(inst.means.rows()));
        worst = std::max(worst, mc.value - 3.0 * mc.std_err - up);
        lower += mc.value - 3.0 * mc.std_err > up;
        upper += up > ln_n + 1e-9;
        cap += mc.value > ln_n + 3.0 * mc.std_err;
    }
    out.push_back(make_check("sandwich", "mc - 3 se <= loo_cmi_upper on 100 instances (violations)", lower == 0, lower, 0));
    out.push_back(make_check("sandwich", "loo_cmi_upper <= ln n + 1e-9 (violations)", upper == 0, upper, 0));
    out.push_back(make_check("sandwich", "mc <= ln n + 3 se (violations)", cap == 0, cap, 0));
    out.push_back(make_check("sandwich", "largest mc - 3 se - upper", worst <= 0.0, worst, 0.0));
}

void suite_influence(std::vector<Check>& out) {
    const double m50 = influence_median_error(50);
    const double m100 = influence_median_error(100);
    const double m200 = influence_median_error(200);
    const double rise = std::max(m100 - m50, m200 - m100);
    out.push_back(make_check("influence", "median error non-increasing over n = 50, 100, 200 (largest rise)", rise <= 0.0,
                             rise, 0.0));
    out.push_back(make_check("influence", "median error at n = 200 <= pinned threshold", m200 <= kInfluenceThreshold, m200,
                             kInfluenceThreshold));
}

void suite_sgd(std::vector<Check>& out) {
    const Dataset ds = generate("gaussian-blobs", 17, 50, 3);
    const double gamma = 0.01;
    const int steps = 50;
    TrainConfig cfg;
    cfg.model.kind = ModelSpec::Kind::logistic;
    cfg.model.lambda = 0.1;
    cfg.optimizer.kind = OptimizerSpec::Kind::sgd;
    cfg.optimizer.eta = 0.5;
    cfg.optimizer.steps = steps;
    cfg.optimizer.batch = 4;
    cfg.optimizer.step_clip = std::sqrt(gamma);
    cfg.init_seed = 1;
    cfg.sgd_order_seed = 2;
    CounterRng rng(3, streams::kVerify);
    const double cap = 2.0 * steps * std::sqrt(gamma);
    double worst_ratio = 0.0, worst_inc = -1e300, worst_norm = 0.0;
    for (int pair = 0; pair < 10; ++pair) {
        const auto i = static_cast<std::size_t>(rng.below(ds.size()));
        auto j = static_cast<std::size_t>(rng.below(ds.size() - 1));
        if (j >= i) ++j;
        const SgdTrace tr = sgd_divergence(ds, cfg, i, j);
        worst_ratio = std::max(worst_ratio, tr.divergence.back() / cap);
        double prev = 0.0;
        for (std::size_t t = 0; t < tr.divergence.size(); ++t) {
            worst_inc = std::max(worst_inc, tr.divergence[t] - prev);
            prev = tr.divergence[t];
            worst_norm = std::max({worst_norm, tr.update_norms_i[t], tr.update_norms_j[t]});
        }
    }
    out.push_back(make_check("sgd", "delta_T / (2 T sqrt(gamma)) on 10 pairs, T=50 gamma=0.01", worst_ratio <= 1.0,
                             worst_ratio, 1.0));
    out.push_back(make_check("sgd", "largest per-step divergence increment <= 2 sqrt(gamma)",
                             worst_inc <= 2.0 * std::sqrt(gamma) + 1e-9, worst_inc, 2.0 * std::sqrt(gamma)));
    out.push_back(make_check("sgd", "largest update norm <= sqrt(gamma)", worst_norm <= std::sqrt(gamma) + 1e-12,
                             worst_norm, std::sqrt(gamma)));
    StabilityProfile prof;
    prof.T = steps;
    prof.gamma = gamma;
    double diff = 0.0;
    for (long long n : {2LL, 50LL, 1000LL}) {
        const StabilityBounds b = stability_bounds(prof, CovSpec::isotropic(1.0), n);
        for (double sigma : {0.25, 1.0, 3.0}) {
            diff = std::max(diff, std::abs(b.lemma5(sigma) - c_n(n) * steps * std::sqrt(gamma) / sigma));
        }
    }
    out.push_back(make_check("sgd", "lemma5 equals c_n T sqrt(gamma) / sigma", diff <= 1e-9, diff, 1e-9));
}

void suite_dpi(std::vector<Check>& out, long long samples) {
    // Ridge predictions are linear, h = X w. With weight noise sigma_w I and
    // prediction noise sigma_p >= sigma_w ||X||_2, the prediction mixture is
    // the weight mixture pushed through X plus independent Gaussian noise,
    // so the data-processing inequality applies to the true CMI values.
    int violations = 0;
    double worst = -1e300;
    int instances = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const std::size_t n = 8 + static_cast<std::size_t>(seed % 5);
        const Dataset ds = generate("linear-regression", seed, n, 2);
        const ExactLoo ex = exact_loo_ridge(ds, 0.1);
        const Matrix w = ex.weights.populated_rows();
        const Matrix preds = w * ds.features.transpose();  // row i = X w_{-i}
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(ds.features.transpose() * ds.features);
        const double lip = std::sqrt(eig.eigenvalues().maxCoeff());
        for (double sigma_w : {0.02, 0.1}) {
            const McEstimate mw = mc_cmi(w, CovSpec::isotropic(sigma_w), samples, seed);
            const McEstimate mp = mc_cmi(preds, CovSpec::isotropic(sigma_w * lip), samples, seed + 1000);
            const double slack = 3.0 * std::hypot(mw.std_err, mp.std_err);
            worst = std::max(worst, mp.value - mw.value - slack);
            violations += mp.value > mw.value + slack;
            ++instances;
        }
    }
    out.push_back(make_check("dpi", "MC floo-CMI <= MC loo-CMI + 3 se under matched noise (" +
                                        std::to_string(instances) + " instances, violations)",
                             violations == 0, violations, 0));
    out.push_back(make_check("dpi", "largest floo - loo - slack", worst <= 0.0, worst, 0.0));
}

}  // namespace

std::vector<Check> run_verify(const std::string& suite, const VerifyOptions& opts) {
    const auto& known = verify_suites();
    if (suite != "all" && std::find(known.begin(), known.end(), suite) == known.end()) {
        throw ConfigError("unknown verify suite '" + suite + "' (lemma1, jensen, sandwich, influence, sgd, dpi, all)");
    }
    if (opts.oracle_samples < 1000) {
        throw ConfigError("oracle samples must be >= 1000");
    }
    std::vector<Check> out;
    auto want = [&](const char* name) { return suite == "all" || suite == name; };
    if (want("lemma1")) suite_lemma1(out);
    if (want("jensen")) suite_jensen(out);
    if (want("sandwich")) suite_sandwich(out, opts.oracle_samples);
    if (want("influence")) suite_influence(out);
    if (want("sgd")) suite_sgd(out);
    if (want("dpi")) suite_dpi(out, opts.oracle_samples);
    return out;
}

namespace {

std::string field(const Json& j) {
    if (j.is_null()) return "";
    if (j.is_string()) return j.get<std::string>();
    return j.dump();
}

std::string nested(const Json& j, const char* a, const char* b) {
    if (!j.contains(a) || j[a].is_null()) return "";
    return field(j[a][b]);
}

}  // namespace

std::size_t run_report(const fs::path& results, const fs::path& out) {
    if (!fs::is_directory(results)) {
        throw ConfigError("results directory " + results.string() + " does not exist");
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(results)) {
        if (e.is_regular_file() && e.path().filename() == "report.json") files.push_back(e.path());
    }
    if (files.empty()) {
        throw ConfigError("no report.json under " + results.string());
    }
    std::sort(files.begin(), files.end(), [&](const fs::path& a, const fs::path& b) {
        return fs::relative(a, results).generic_string() < fs::relative(b, results).generic_string();
    });

    std::string summary =
        "report,experiment,seed,n,sigma,train_err,test_err,loo_cmi,floo_cmi,gen_bound_weights,gen_bound_predictions,"
        "loo_gap,loss\n";
    std::string plot = "x,y,series\n";
    for (const auto& f : files) {
        Json j;
        try {
            std::string text;
            for (const auto& l : io::read_lines(f)) text += l + "\n";
            j = Json::parse(text);
        } catch (const Json::exception& e) {
            throw ParseError(f.string(), 1, std::string("invalid report JSON: ") + e.what());
        }
        const std::string rel = fs::relative(f.parent_path(), results).generic_string();
        const std::string sigma = nested(j, "noise", "prediction_sigma");
        const std::string n = field(j["n"]);
        summary += rel + "," + field(j["experiment"]) + "," + field(j["seed"]) + "," + n + "," + sigma + "," +
                   nested(j, "measured_gap", "train_loss") + "," + nested(j, "measured_gap", "test_loss") + "," +
                   field(j["loo_cmi_upper"]) + "," + field(j["floo_cmi_upper"]) + "," + field(j["gen_bound_weights"]) +
                   "," + field(j["gen_bound_predictions"]) + "," + nested(j, "measured_gap", "loo_gap") + "," +
                   nested(j, "loss", "id") + "\n";
        const std::string tag_sigma = sigma.empty() ? "" : " sigma=" + short_real(json_real(sigma));
        const std::string tag_n = " n=" + n;
        if (!j["gen_bound_predictions"].is_null()) {
            plot += n + "," + field(j["gen_bound_predictions"]) + ",floo_gen_bound" + tag_sigma + "\n";
        }
        if (!j["gen_bound_weights"].is_null()) {
            plot += n + "," + field(j["gen_bound_weights"]) + ",loo_gen_bound" + tag_sigma + "\n";
        }
        if (!sigma.empty() && !j["floo_cmi_upper"].is_null()) {
            plot += sigma + "," + field(j["floo_cmi_upper"]) + ",floo_cmi" + tag_n + "\n";
        }
        if (!sigma.empty() && j.contains("noisy_test_error") && !j["noisy_test_error"].is_null()) {
            plot += sigma + "," + field(j["noisy_test_error"]["value"]) + ",noisy_test_error" + tag_n + "\n";
        }
    }
    io::write_file(out / "summary.csv", summary);
    io::write_file(out / "plot_data.csv", plot);
    return files.size();
}

}  // namespace loocmi
