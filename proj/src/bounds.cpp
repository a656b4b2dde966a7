#include "loocmi/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "loocmi/error.hpp"

namespace loocmi {

std::string LossSpec::name() const {
    switch (id) {
        case Id::zero_one: return "zero-one";
        case Id::clipped_ce: return "clipped-ce";
        case Id::clipped_sq: return "clipped-sq";
    }
    return "?";
}

LossSpec LossSpec::parse(const std::string& name, double cap, int num_classes) {
    LossSpec spec;
    if (name == "zero-one") {
        spec.id = Id::zero_one;
        spec.cap = 1.0;
        return spec;
    }
    if (name == "clipped-ce") {
        spec.id = Id::clipped_ce;
        spec.cap = cap > 0.0 ? cap : 4.0 * std::log(static_cast<double>(std::max(2, num_classes)));
        return spec;
    }
    if (name == "clipped-sq") {
        spec.id = Id::clipped_sq;
        spec.cap = cap > 0.0 ? cap : 1.0;
        return spec;
    }
    throw ConfigError("unknown loss '" + name + "' (expected zero-one, clipped-ce or clipped-sq)");
}

LossTable::LossTable(std::vector<double> values, std::string loss_id)
    : values_(std::move(values)), loss_id_(std::move(loss_id)) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!(values_[i] >= 0.0 && values_[i] <= 1.0)) {
            throw DomainError("loss of sample " + std::to_string(i) + " is outside [0, 1]");
        }
    }
}

std::vector<double> bounded_losses(const Matrix& outputs, const Vector& labels, const LossSpec& loss) {
    if (outputs.rows() != labels.size()) {
        throw DomainError("bounded_losses: outputs and labels disagree in length");
    }
    std::vector<double> out(static_cast<std::size_t>(outputs.rows()));
    for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
        const double y = labels(i);
        double l = 0.0;
        switch (loss.id) {
            case LossSpec::Id::zero_one: {
                if (outputs.cols() < 2) {
                    throw DomainError("zero-one loss needs class-probability outputs");
                }
                Eigen::Index arg = 0;
                outputs.row(i).maxCoeff(&arg);
                l = static_cast<double>(arg) == y ? 0.0 : 1.0;
                break;
            }
            case LossSpec::Id::clipped_ce: {
                if (outputs.cols() < 2) {
                    throw DomainError("cross-entropy loss needs class-probability outputs");
                }
                const double prob = outputs(i, static_cast<Eigen::Index>(y));
                l = std::min(1.0, -std::log(std::max(prob, 1e-300)) / loss.cap);
                break;
            }
            case LossSpec::Id::clipped_sq: {
                const double r = outputs(i, 0) - y;
                l = std::min(1.0, r * r / loss.cap);
                break;
            }
        }
        out[static_cast<std::size_t>(i)] = l;
    }
    return out;
}

double loo_cv(const LossTable& losses, std::size_t u) {
    const std::size_t n = losses.size();
    if (n < 2) {
        throw DomainError("loo_cv needs n >= 2");
    }
    if (u >= n) {
        throw DomainError("loo_cv: index " + std::to_string(u) + " out of range for n = " + std::to_string(n));
    }
    double rest = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i != u) rest += losses[i];
    }
    return rest / static_cast<double>(n - 1) - losses[u];
}

Lemma1Check verify_lemma1(int n, double t, double grid_step) {
    if (n < 2 || n > 5) {
        throw ConfigError("verify_lemma1: n must be in [2, 5] (grid size grows exponentially)");
    }
    if (!(t > 0.0)) {
        throw DomainError("verify_lemma1: t must be > 0");
    }
    const double cells = 1.0 / grid_step;
    const long long steps = std::llround(cells);
    if (!(grid_step > 0.0) || steps < 1 || std::abs(cells - static_cast<double>(steps)) > 1e-9) {
        throw ConfigError("verify_lemma1: grid_step must divide 1");
    }
    const long long g = steps + 1;
    long long total = 1;
    for (int k = 0; k < n; ++k) total *= g;

    const double cn = c_n(n);
    Lemma1Check out;
    out.bound = std::exp(t * t * cn * cn / 8.0);
    out.max_mgf = -1.0;
    std::vector<double> l(static_cast<std::size_t>(n));
    std::vector<long long> digit(static_cast<std::size_t>(n), 0);
    for (long long idx = 0; idx < total; ++idx) {
        long long rem = idx;
        double sum = 0.0;
        for (int k = 0; k < n; ++k) {
            digit[static_cast<std::size_t>(k)] = rem % g;
            rem /= g;
            l[static_cast<std::size_t>(k)] = static_cast<double>(digit[static_cast<std::size_t>(k)]) /
                                             static_cast<double>(steps);
            sum += l[static_cast<std::size_t>(k)];
        }
        double mgf = 0.0;
        for (int u = 0; u < n; ++u) {
            const double lu = l[static_cast<std::size_t>(u)];
            const double cv = (sum - lu) / static_cast<double>(n - 1) - lu;
            mgf += std::exp(t * cv);
        }
        mgf /= static_cast<double>(n);
        if (mgf > out.max_mgf) {
            out.max_mgf = mgf;
            out.argmax = l;
        }
    }
    out.holds = out.max_mgf <= out.bound;
    return out;
}

double cmi_upper_from_kl(const PairwiseKLMatrix& kl) {
    const std::size_t n = kl.size();
    if (n < 2) {
        throw DomainError("CMI bound needs at least two leave-one-out rows");
    }
    // Each term ln n - lse_i lies in [0, ln n] (the j = i summand is e^0), so
    // averaging terms rather than subtracting the averaged lse keeps the
    // result exactly 0 for coincident rows and never negative.
    const double log_n = std::log(static_cast<double>(n));
    std::vector<double> row(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            row[j] = -kl(i, j);
        }
        acc += std::max(0.0, log_n - log_sum_exp(row));
    }
    return acc / static_cast<double>(n);
}

double jensen_from_kl(const PairwiseKLMatrix& kl) {
    const std::size_t n = kl.size();
    if (n < 2) {
        throw DomainError("CMI bound needs at least two leave-one-out rows");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            acc += kl(i, j);
        }
    }
    return acc / static_cast<double>(n * n);
}

double loo_cmi_upper(const Matrix& means, const CovSpec& cov) {
    if (means.rows() < 2) {
        throw DomainError("loo_cmi_upper needs at least two leave-one-out rows");
    }
    return cmi_upper_from_kl(pairwise_kl(means, cov));
}

double loo_cmi_upper(const LooWeights& loo, const CovSpec& cov) {
    return loo_cmi_upper(loo.populated_rows(), cov);
}

namespace {

void check_tensor(const LooPredictions& preds) {
    if (preds.rows.size() < 2) {
        throw DomainError("prediction bound needs at least two leave-one-out rows");
    }
    if (preds.values.rows() != static_cast<Eigen::Index>(preds.rows.size()) ||
        preds.values.cols() != static_cast<Eigen::Index>(preds.n * preds.d) || preds.n == 0 || preds.d == 0) {
        throw DomainError("prediction tensor is missing entries");
    }
}

}  // namespace

double floo_cmi_upper(const LooPredictions& preds, double sigma) {
    check_tensor(preds);
    return cmi_upper_from_kl(pairwise_kl(preds.values, CovSpec::isotropic(sigma)));
}

double jensen_cmi_upper(const Matrix& means, const CovSpec& cov) {
    return jensen_from_kl(pairwise_kl(means, cov));
}

double jensen_cmi_upper(const LooWeights& loo, const CovSpec& cov) {
    return jensen_cmi_upper(loo.populated_rows(), cov);
}

double jensen_cmi_upper(const LooPredictions& preds, double sigma) {
    check_tensor(preds);
    return jensen_from_kl(pairwise_kl(preds.values, CovSpec::isotropic(sigma)));
}

double gen_bound_from_cmi(double cmi, long long n) {
    if (cmi < 0.0 || std::isnan(cmi)) {
        throw DomainError("gen_bound_from_cmi: cmi must be >= 0");
    }
    return c_n(n) / std::sqrt(2.0) * std::sqrt(cmi);
}

void StabilityProfile::validate() const {
    const double vals[] = {epsilon, beta, beta1, gamma};
    for (double v : vals) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw DomainError("stability profile entries must be finite and >= 0");
        }
    }
    if (!(lipschitz_L > 0.0) || !std::isfinite(lipschitz_L)) {
        throw DomainError("Lipschitz constant must be finite and > 0");
    }
    if (T < 0) {
        throw DomainError("number of steps T must be >= 0");
    }
}

double StabilityBounds::lemma5(double sigma) const {
    if (!(sigma > 0.0)) {
        throw DomainError("lemma5 bound needs sigma > 0");
    }
    const double cn = c_n(n);
    return std::sqrt(cn * cn * static_cast<double>(T) * static_cast<double>(T) * gamma / (sigma * sigma));
}

StabilityBounds stability_bounds(const StabilityProfile& profile, const CovSpec& cov, long long n) {
    profile.validate();
    const double cn = c_n(n);
    const double nn = static_cast<double>(n);
    StabilityBounds b;
    b.n = n;
    b.T = profile.T;
    b.gamma = profile.gamma;
    b.thm5 = std::sqrt(4.0 * cn * profile.epsilon * profile.lipschitz_L * std::sqrt(cov.trace(profile.k)));
    const double inner = nn * static_cast<double>(profile.d) *
                         (nn * profile.beta * profile.beta + 2.0 * profile.beta1 * profile.beta1);
    b.thm6 = std::sqrt(4.0 * cn * profile.lipschitz_L * std::sqrt(inner));
    return b;
}

double weight_stability(const LooWeights& loo, const CovSpec& cov) {
    const Matrix rows = loo.populated_rows();
    if (rows.rows() < 2) {
        return 0.0;
    }
    const PairwiseKLMatrix kl = pairwise_kl(rows, cov);
    return std::sqrt(2.0 * kl.values().maxCoeff());
}

FunctionalStability functional_stability(const LooPredictions& train, const std::optional<LooPredictions>& probes) {
    FunctionalStability out;
    const std::size_t s = train.rows.size();
    const auto d = static_cast<Eigen::Index>(train.d);
    for (std::size_t a = 0; a < s; ++a) {
        for (std::size_t b = a + 1; b < s; ++b) {
            const auto ra = static_cast<Eigen::Index>(a);
            const auto rb = static_cast<Eigen::Index>(b);
            for (std::size_t k = 0; k < train.n; ++k) {
                if (k == train.rows[a] || k == train.rows[b]) continue;
                const auto off = static_cast<Eigen::Index>(k) * d;
                const double dist =
                    (train.values.row(ra).segment(off, d) - train.values.row(rb).segment(off, d)).norm();
                out.beta = std::max(out.beta, dist);
            }
            if (probes) {
                const Eigen::RowVectorXd diff = probes->values.row(ra) - probes->values.row(rb);
                for (std::size_t k = 0; k < probes->n; ++k) {
                    out.beta1 = std::max(out.beta1, diff.segment(static_cast<Eigen::Index>(k) * d, d).norm());
                }
            }
        }
    }
    return out;
}

StabilityProfile measure_stability(const LooWeights& loo, const CovSpec& cov, const Dataset& ds,
                                   const Matrix& probes) {
    StabilityProfile profile;
    profile.empirical = true;
    profile.k = loo.k();
    profile.epsilon = weight_stability(loo, cov);
    const LooPredictions train = predict_all(ds, loo);
    profile.d = train.d;
    std::optional<LooPredictions> probe_preds;
    if (probes.rows() > 0) {
        Dataset probe_ds;
        probe_ds.features = probes;
        probe_ds.labels = Vector::Zero(probes.rows());
        probe_ds.num_classes = ds.num_classes;
        LooPredictions p;
        p.rows = train.rows;
        p.n = static_cast<std::size_t>(probes.rows());
        p.d = train.d;
        p.values.resize(train.values.rows(), static_cast<Eigen::Index>(p.n * p.d));
        for (std::size_t r = 0; r < p.rows.size(); ++r) {
            const Vector w = loo.weights.row(static_cast<Eigen::Index>(p.rows[r])).transpose();
            const Matrix out = predict(loo.config->model, w, probes, ds.num_classes);
            const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = out;
            p.values.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const Eigen::RowVectorXd>(rm.data(), rm.size());
        }
        probe_preds = std::move(p);
    }
    const FunctionalStability fs = functional_stability(train, probe_preds);
    profile.beta = fs.beta;
    profile.beta1 = fs.beta1;
    return profile;
}

double local_bound(const Matrix& influence, const Matrix& hess) {
    if (influence.cols() != hess.rows()) {
        throw DomainError("local_bound: influence vectors and Hessian disagree in dimension");
    }
    CovSpec cov = [&] {
        try {
            return CovSpec::full_inverse(hess);
        } catch (const DomainError& e) {
            throw DomainError(std::string("local_bound: Hessian is not positive-definite after damping (") +
                              e.what() + ")");
        }
    }();
    return cmi_upper_from_kl(pairwise_kl(influence, cov));
}

GapEstimate loo_gap(const LooPredictions& preds, const Dataset& ds, const LossSpec& loss) {
    if (preds.n != ds.size()) {
        throw DomainError("loo_gap: prediction tensor and dataset disagree in n");
    }
    const std::size_t s = preds.rows.size();
    if (s == 0) {
        throw DomainError("loo_gap: no leave-one-out rows");
    }
    GapEstimate g;
    std::vector<double> cvs;
    cvs.reserve(s);
    double heldout = 0.0;
    for (std::size_t r = 0; r < s; ++r) {
        Matrix out(static_cast<Eigen::Index>(preds.n), static_cast<Eigen::Index>(preds.d));
        for (std::size_t j = 0; j < preds.n; ++j) {
            for (std::size_t c = 0; c < preds.d; ++c) {
                out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) = preds.at(r, j, c);
            }
        }
        const LossTable table(bounded_losses(out, ds.labels, loss), loss.name());
        cvs.push_back(loo_cv(table, preds.rows[r]));
        heldout += table[preds.rows[r]];
    }
    double mean = 0.0;
    for (double v : cvs) mean += v;
    mean /= static_cast<double>(s);
    g.loo_gap = std::min(1.0, std::abs(mean));
    g.loo_heldout_loss = heldout / static_cast<double>(s);
    if (loss.id == LossSpec::Id::zero_one) {
        const double e = g.loo_heldout_loss;
        g.loo_std_err = std::sqrt(e * (1.0 - e) / static_cast<double>(s));
    } else if (s > 1) {
        double var = 0.0;
        for (double v : cvs) var += (v - mean) * (v - mean);
        var /= static_cast<double>(s - 1);
        g.loo_std_err = std::sqrt(var / static_cast<double>(s));
    }
    return g;
}

GapEstimate measured_gap(const LooWeights& loo, const Dataset& ds, const Dataset& test, const LossSpec& loss) {
    if (!loo.config || loo.full_weights.size() == 0) {
        throw DomainError("measured_gap needs trained weights with their configuration");
    }
    GapEstimate g = loo_gap(predict_all(ds, loo), ds, loss);
    const auto& model = loo.config->model;
    const auto train_l = bounded_losses(predict(model, loo.full_weights, ds.features, ds.num_classes), ds.labels, loss);
    const auto test_l = bounded_losses(predict(model, loo.full_weights, test.features, test.num_classes), test.labels, loss);
    auto mean = [](const std::vector<double>& v) {
        double a = 0.0;
        for (double x : v) a += x;
        return a / static_cast<double>(v.size());
    };
    g.train_loss = mean(train_l);
    g.test_loss = mean(test_l);
    g.heldout_gap = std::abs(g.test_loss - g.train_loss);
    auto var = [](const std::vector<double>& v, double m) {
        double a = 0.0;
        for (double x : v) a += (x - m) * (x - m);
        return v.size() > 1 ? a / static_cast<double>(v.size() - 1) : 0.0;
    };
    g.heldout_std_err = std::sqrt(var(train_l, g.train_loss) / static_cast<double>(train_l.size()) +
                                  var(test_l, g.test_loss) / static_cast<double>(test_l.size()));
    return g;
}

}  // namespace loocmi
