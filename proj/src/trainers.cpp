#include "loocmi/trainers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include "loocmi/error.hpp"
#include "loocmi/io.hpp"
#include "loocmi/rng.hpp"

namespace loocmi {

std::string ModelSpec::name() const {
    switch (kind) {
        case Kind::ridge: return "ridge";
        case Kind::logistic: return "logistic";
        case Kind::mlp: return "mlp";
    }
    return "?";
}

std::string OptimizerSpec::name() const {
    switch (kind) {
        case Kind::closed_form: return "closed-form";
        case Kind::full_batch_gd: return "full-batch-gd";
        case Kind::sgd: return "sgd";
    }
    return "?";
}

void TrainConfig::validate() const {
    if (!(model.lambda >= 0.0) || !std::isfinite(model.lambda)) {
        throw ConfigError("lambda must be a finite value >= 0");
    }
    if (model.kind == ModelSpec::Kind::mlp && (model.hidden < 1 || model.hidden > 32)) {
        throw ConfigError("mlp hidden units must be in [1, 32]");
    }
    if (optimizer.kind == OptimizerSpec::Kind::closed_form) {
        if (model.kind != ModelSpec::Kind::ridge) {
            throw ConfigError("closed-form training is only available for ridge");
        }
        return;
    }
    if (!(optimizer.eta > 0.0)) {
        throw ConfigError("learning rate eta must be > 0");
    }
    if (optimizer.steps < 1) {
        throw ConfigError("iterative training needs T >= 1 steps");
    }
    if (model.kind == ModelSpec::Kind::mlp && optimizer.kind != OptimizerSpec::Kind::full_batch_gd) {
        throw ConfigError("mlp is trained with full-batch gradient descent");
    }
    if (optimizer.kind == OptimizerSpec::Kind::sgd) {
        if (optimizer.batch < 1) {
            throw ConfigError("sgd batch size must be >= 1");
        }
        if (optimizer.step_clip && !(*optimizer.step_clip > 0.0)) {
            throw ConfigError("sgd step_clip must be > 0");
        }
        if (optimizer.momentum < 0.0 || optimizer.momentum >= 1.0) {
            throw ConfigError("sgd momentum must be in [0, 1)");
        }
    }
}

namespace {

bool is_classifier(const ModelSpec& model, int num_classes) {
    switch (model.kind) {
        case ModelSpec::Kind::ridge: return false;
        case ModelSpec::Kind::logistic: return true;
        case ModelSpec::Kind::mlp: return num_classes > 0;
    }
    return false;
}

void check_task(const ModelSpec& model, int num_classes) {
    if (model.kind == ModelSpec::Kind::logistic && num_classes != 2) {
        throw ConfigError("logistic model needs a two-class dataset");
    }
    if (model.kind == ModelSpec::Kind::mlp && num_classes != 0 && num_classes != 2) {
        throw ConfigError("mlp supports regression or two-class data");
    }
}

double sigmoid(double z) {
    if (z >= 0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

// One-hidden-layer tanh network. Parameter layout:
// [W1 (h x p, row-major) | b1 (h) | v (h) | c].
struct Mlp {
    std::size_t p;
    std::size_t h;

    std::size_t size() const { return h * p + 2 * h + 1; }

    double forward(const Vector& w, const Eigen::Ref<const Vector>& x, Vector* hidden) const {
        Vector z(static_cast<Eigen::Index>(h));
        double out = w(static_cast<Eigen::Index>(h * p + 2 * h));
        for (std::size_t u = 0; u < h; ++u) {
            double a = w(static_cast<Eigen::Index>(h * p + u));
            for (std::size_t k = 0; k < p; ++k) {
                a += w(static_cast<Eigen::Index>(u * p + k)) * x(static_cast<Eigen::Index>(k));
            }
            z(static_cast<Eigen::Index>(u)) = std::tanh(a);
            out += w(static_cast<Eigen::Index>(h * p + h + u)) * z(static_cast<Eigen::Index>(u));
        }
        if (hidden) {
            *hidden = std::move(z);
        }
        return out;
    }

    // d out / d w
    Vector jacobian(const Vector& w, const Eigen::Ref<const Vector>& x) const {
        Vector z;
        forward(w, x, &z);
        Vector j(static_cast<Eigen::Index>(size()));
        for (std::size_t u = 0; u < h; ++u) {
            const double zu = z(static_cast<Eigen::Index>(u));
            const double back = w(static_cast<Eigen::Index>(h * p + h + u)) * (1.0 - zu * zu);
            for (std::size_t k = 0; k < p; ++k) {
                j(static_cast<Eigen::Index>(u * p + k)) = back * x(static_cast<Eigen::Index>(k));
            }
            j(static_cast<Eigen::Index>(h * p + u)) = back;
            j(static_cast<Eigen::Index>(h * p + h + u)) = zu;
        }
        j(static_cast<Eigen::Index>(h * p + 2 * h)) = 1.0;
        return j;
    }
};

Mlp make_mlp(const ModelSpec& model, std::size_t p) {
    return Mlp{p, static_cast<std::size_t>(model.hidden)};
}

Vector augmented(const Eigen::Ref<const Vector>& x) {
    Vector xa(x.size() + 1);
    xa.head(x.size()) = x;
    xa(x.size()) = 1.0;
    return xa;
}

// Scalar model output before the link: x^T w, logit, or network output.
double raw_output(const ModelSpec& model, const Vector& w, const Eigen::Ref<const Vector>& x) {
    switch (model.kind) {
        case ModelSpec::Kind::ridge: return x.dot(w);
        case ModelSpec::Kind::logistic: return x.dot(w.head(x.size())) + w(x.size());
        case ModelSpec::Kind::mlp:
            return make_mlp(model, static_cast<std::size_t>(x.size())).forward(w, x, nullptr);
    }
    return 0.0;
}

// Sum over the selected rows of per-sample gradients.
Vector data_gradient_sum(const ModelSpec& model, const Vector& w, const Matrix& x, const Vector& y,
                         int num_classes, const std::vector<std::size_t>* rows) {
    const Eigen::Index p = x.cols();
    if (model.kind == ModelSpec::Kind::mlp) {
        Vector g = Vector::Zero(w.size());
        auto add = [&](Eigen::Index i) {
            g += per_sample_gradient(model, w, x.row(i).transpose(), y(i), num_classes);
        };
        if (rows) {
            for (std::size_t i : *rows) add(static_cast<Eigen::Index>(i));
        } else {
            for (Eigen::Index i = 0; i < x.rows(); ++i) add(i);
        }
        return g;
    }
    auto residual = [&](Eigen::Index i) {
        const double out = raw_output(model, w, x.row(i).transpose());
        return model.kind == ModelSpec::Kind::ridge ? 2.0 * (out - y(i)) : sigmoid(out) - y(i);
    };
    Vector g = Vector::Zero(w.size());
    auto add = [&](Eigen::Index i) {
        const double r = residual(i);
        g.head(p) += r * x.row(i).transpose();
        if (model.kind == ModelSpec::Kind::logistic) {
            g(p) += r;
        }
    };
    if (rows) {
        for (std::size_t i : *rows) add(static_cast<Eigen::Index>(i));
    } else {
        for (Eigen::Index i = 0; i < x.rows(); ++i) add(i);
    }
    return g;
}

void require_finite(const Vector& w, const char* where) {
    if (!w.allFinite()) {
        throw NumericalError(std::string(where) + ": weights diverged to non-finite values; reduce eta");
    }
}

// Mini-batch SGD with optional momentum and update clipping. Batch order is a
// function of (sgd_order_seed, training-set size) only.
class SgdRunner {
public:
    SgdRunner(const Matrix& x, const Vector& y, int num_classes, const TrainConfig& cfg)
        : x_(x), y_(y), num_classes_(num_classes), cfg_(cfg),
          w_(initial_weights(cfg.model, static_cast<std::size_t>(x.cols()), num_classes, cfg.init_seed)),
          velocity_(Vector::Zero(w_.size())), order_rng_(cfg.sgd_order_seed, streams::kSgdOrder),
          perm_(static_cast<std::size_t>(x.rows())) {
        reshuffle();
    }

    double step() {
        const auto m = static_cast<std::size_t>(x_.rows());
        const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(cfg_.optimizer.batch), m);
        batch_.clear();
        while (batch_.size() < b) {
            if (pos_ == perm_.size()) {
                reshuffle();
            }
            batch_.push_back(perm_[pos_++]);
        }
        Vector g = data_gradient_sum(cfg_.model, w_, x_, y_, num_classes_, &batch_) / static_cast<double>(b);
        g += (2.0 * cfg_.model.lambda / static_cast<double>(m)) * w_;
        Vector update;
        if (cfg_.optimizer.momentum > 0.0) {
            velocity_ = cfg_.optimizer.momentum * velocity_ + g;
            update = -cfg_.optimizer.eta * velocity_;
        } else {
            update = -cfg_.optimizer.eta * g;
        }
        double norm = update.norm();
        if (cfg_.optimizer.step_clip && norm > *cfg_.optimizer.step_clip) {
            update *= *cfg_.optimizer.step_clip / norm;
            norm = update.norm();
        }
        w_ += update;
        return norm;
    }

    const Vector& weights() const { return w_; }

private:
    void reshuffle() {
        std::iota(perm_.begin(), perm_.end(), std::size_t{0});
        for (std::size_t i = perm_.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(order_rng_.below(i));
            std::swap(perm_[i - 1], perm_[j]);
        }
        pos_ = 0;
    }

    const Matrix& x_;
    const Vector& y_;
    int num_classes_;
    const TrainConfig& cfg_;
    Vector w_;
    Vector velocity_;
    CounterRng order_rng_;
    std::vector<std::size_t> perm_;
    std::size_t pos_ = 0;
    std::vector<std::size_t> batch_;
};

}  // namespace

std::size_t param_count(const ModelSpec& model, std::size_t p) {
    switch (model.kind) {
        case ModelSpec::Kind::ridge: return p;
        case ModelSpec::Kind::logistic: return p + 1;
        case ModelSpec::Kind::mlp: return make_mlp(model, p).size();
    }
    return 0;
}

std::size_t output_dim(const ModelSpec& model, int num_classes) {
    return is_classifier(model, num_classes) ? 2 : 1;
}

Vector initial_weights(const ModelSpec& model, std::size_t p, int num_classes, std::uint64_t init_seed) {
    check_task(model, num_classes);
    const auto k = static_cast<Eigen::Index>(param_count(model, p));
    Vector w = Vector::Zero(k);
    if (model.kind == ModelSpec::Kind::mlp) {
        const auto h = static_cast<std::size_t>(model.hidden);
        CounterRng rng(init_seed, streams::kInit);
        const double s_in = 1.0 / std::sqrt(static_cast<double>(p));
        const double s_out = 1.0 / std::sqrt(static_cast<double>(h));
        for (std::size_t i = 0; i < h * p; ++i) {
            w(static_cast<Eigen::Index>(i)) = s_in * rng.normal();
        }
        for (std::size_t u = 0; u < h; ++u) {
            w(static_cast<Eigen::Index>(h * p + h + u)) = s_out * rng.normal();
        }
    }
    return w;
}

Matrix predict(const ModelSpec& model, const Vector& w, const Matrix& x, int num_classes) {
    const bool cls = is_classifier(model, num_classes);
    Matrix out(x.rows(), cls ? 2 : 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double o = raw_output(model, w, x.row(i).transpose());
        if (cls) {
            const double s = sigmoid(o);
            out(i, 0) = 1.0 - s;
            out(i, 1) = s;
        } else {
            out(i, 0) = o;
        }
    }
    return out;
}

double sample_loss(const ModelSpec& model, const Vector& w, const Eigen::Ref<const Vector>& x, double y,
                   int num_classes) {
    const double o = raw_output(model, w, x);
    const double loss = is_classifier(model, num_classes) ? softplus(o) - y * o : (o - y) * (o - y);
    if (!std::isfinite(loss)) {
        throw NumericalError("non-finite loss at the given weights");
    }
    return loss;
}

Vector per_sample_gradient(const ModelSpec& model, const Vector& w, const Eigen::Ref<const Vector>& x, double y,
                           int num_classes) {
    const auto p = static_cast<std::size_t>(x.size());
    if (w.size() != static_cast<Eigen::Index>(param_count(model, p))) {
        throw DomainError("weight vector has the wrong dimension for this model");
    }
    Vector g;
    switch (model.kind) {
        case ModelSpec::Kind::ridge: g = 2.0 * (x.dot(w) - y) * x; break;
        case ModelSpec::Kind::logistic: g = (sigmoid(raw_output(model, w, x)) - y) * augmented(x); break;
        case ModelSpec::Kind::mlp: {
            const Mlp net = make_mlp(model, p);
            const double o = net.forward(w, x, nullptr);
            const double dl = is_classifier(model, num_classes) ? sigmoid(o) - y : 2.0 * (o - y);
            g = dl * net.jacobian(w, x);
            break;
        }
    }
    if (!g.allFinite()) {
        throw NumericalError("non-finite gradient at the given weights");
    }
    return g;
}

Matrix hessian(const ModelSpec& model, const Vector& w, const Dataset& ds) {
    const Matrix& x = ds.features;
    const auto n = static_cast<double>(ds.size());
    const auto k = static_cast<Eigen::Index>(param_count(model, ds.dim()));
    if (w.size() != k) {
        throw DomainError("weight vector has the wrong dimension for this model");
    }
    Matrix h = Matrix::Zero(k, k);
    switch (model.kind) {
        case ModelSpec::Kind::ridge: h = 2.0 * x.transpose() * x; break;
        case ModelSpec::Kind::logistic:
            for (Eigen::Index i = 0; i < x.rows(); ++i) {
                const double s = sigmoid(raw_output(model, w, x.row(i).transpose()));
                const Vector xa = augmented(x.row(i).transpose());
                h.selfadjointView<Eigen::Lower>().rankUpdate(xa, s * (1.0 - s));
            }
            h.triangularView<Eigen::StrictlyUpper>() = h.transpose();
            break;
        case ModelSpec::Kind::mlp: {
            const Mlp net = make_mlp(model, ds.dim());
            const bool cls = is_classifier(model, ds.num_classes);
            for (Eigen::Index i = 0; i < x.rows(); ++i) {
                const Vector j = net.jacobian(w, x.row(i).transpose());
                double curvature = 2.0;
                if (cls) {
                    const double s = sigmoid(net.forward(w, x.row(i).transpose(), nullptr));
                    curvature = s * (1.0 - s);
                }
                h.selfadjointView<Eigen::Lower>().rankUpdate(j, curvature);
            }
            h.triangularView<Eigen::StrictlyUpper>() = h.transpose();
            break;
        }
    }
    h.diagonal().array() += 2.0 * model.lambda;
    h /= n;
    if (!h.allFinite()) {
        throw NumericalError("non-finite Hessian at the given weights");
    }
    return h;
}

TrainResult train_detailed(const Matrix& x, const Vector& y, int num_classes, const TrainConfig& config) {
    config.validate();
    check_task(config.model, num_classes);
    const auto m = static_cast<double>(x.rows());
    TrainResult result;
    switch (config.optimizer.kind) {
        case OptimizerSpec::Kind::closed_form: {
            Matrix a = x.transpose() * x;
            a.diagonal().array() += config.model.lambda;
            const Vector b = x.transpose() * y;
            Eigen::LLT<Matrix> llt(a);
            if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) {
                throw NumericalError("ridge normal equations are singular; set lambda > 0");
            }
            result.weights = llt.solve(b);
            break;
        }
        case OptimizerSpec::Kind::full_batch_gd: {
            Vector w = initial_weights(config.model, static_cast<std::size_t>(x.cols()), num_classes,
                                       config.init_seed);
            for (int t = 0; t < config.optimizer.steps; ++t) {
                Vector g = data_gradient_sum(config.model, w, x, y, num_classes, nullptr);
                g += 2.0 * config.model.lambda * w;
                w -= (config.optimizer.eta / m) * g;
            }
            result.weights = std::move(w);
            break;
        }
        case OptimizerSpec::Kind::sgd: {
            SgdRunner runner(x, y, num_classes, config);
            result.update_norms.reserve(static_cast<std::size_t>(config.optimizer.steps));
            for (int t = 0; t < config.optimizer.steps; ++t) {
                result.update_norms.push_back(runner.step());
            }
            result.weights = runner.weights();
            break;
        }
    }
    require_finite(result.weights, "train");
    return result;
}

Vector train(const Dataset& ds, const TrainConfig& config) {
    return train_detailed(ds.features, ds.labels, ds.num_classes, config).weights;
}

Vector train(const LooView& view, const TrainConfig& config) {
    return train_detailed(view.features(), view.labels(), view.base().num_classes, config).weights;
}

std::vector<std::size_t> LooWeights::populated() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < present.size(); ++i) {
        if (present[i]) idx.push_back(i);
    }
    return idx;
}

Matrix LooWeights::populated_rows() const {
    const auto idx = populated();
    Matrix out(static_cast<Eigen::Index>(idx.size()), weights.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = weights.row(static_cast<Eigen::Index>(idx[r]));
    }
    return out;
}

std::vector<std::size_t> choose_subset(std::size_t n, std::size_t s, std::uint64_t selection_seed) {
    if (s > n) {
        throw ConfigError("subset size " + std::to_string(s) + " exceeds n = " + std::to_string(n));
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    CounterRng rng(selection_seed, streams::kSubset);
    for (std::size_t i = 0; i < s; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(s);
    std::sort(idx.begin(), idx.end());
    return idx;
}

LooWeights train_loo(const Dataset& ds, const TrainConfig& config,
                     const std::optional<std::vector<std::size_t>>& subset, unsigned threads) {
    ds.validate();
    config.validate();
    const std::size_t n = ds.size();
    std::vector<std::size_t> rows;
    if (subset) {
        rows = *subset;
        std::vector<bool> seen(n, false);
        for (std::size_t i : rows) {
            if (i >= n) {
                throw DomainError("subset index " + std::to_string(i) + " out of range for n = " + std::to_string(n));
            }
            if (seen[i]) {
                throw DomainError("subset index " + std::to_string(i) + " repeated");
            }
            seen[i] = true;
        }
        std::sort(rows.begin(), rows.end());
    } else {
        rows.resize(n);
        std::iota(rows.begin(), rows.end(), std::size_t{0});
    }

    LooWeights loo;
    loo.config = config;
    loo.feature_dim = ds.dim();
    loo.num_classes = ds.num_classes;
    const auto k = static_cast<Eigen::Index>(param_count(config.model, ds.dim()));
    loo.weights = Matrix::Zero(static_cast<Eigen::Index>(n), k);
    loo.present.assign(n, false);

    const TrainResult full = train_detailed(ds.features, ds.labels, ds.num_classes, config);
    loo.full_weights = full.weights;

    std::vector<double> max_norm(rows.size(), 0.0);
    std::vector<std::exception_ptr> errors(rows.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r = next.fetch_add(1); r < rows.size(); r = next.fetch_add(1)) {
            try {
                const LooView view(ds, rows[r]);
                const TrainResult res = train_detailed(view.features(), view.labels(), ds.num_classes, config);
                loo.weights.row(static_cast<Eigen::Index>(rows[r])) = res.weights.transpose();
                for (double u : res.update_norms) max_norm[r] = std::max(max_norm[r], u);
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    };
    unsigned workers = threads == 0 ? std::max(1U, std::thread::hardware_concurrency()) : threads;
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(1, rows.size())));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (errors[r]) {
            try {
                std::rethrow_exception(errors[r]);
            } catch (const std::exception& e) {
                throw RowError(rows[r], e.what());
            }
        }
        loo.present[rows[r]] = true;
    }
    loo.max_update_norm = 0.0;
    for (double v : full.update_norms) loo.max_update_norm = std::max(loo.max_update_norm, v);
    for (double v : max_norm) loo.max_update_norm = std::max(loo.max_update_norm, v);
    return loo;
}

LooPredictions predict_all(const Dataset& ds, const LooWeights& loo) {
    if (!loo.config) {
        throw DomainError("predict_all: leave-one-out weights carry no model configuration");
    }
    if (loo.n() != ds.size()) {
        throw DomainError("predict_all: weights were trained for n = " + std::to_string(loo.n()) +
                          " but the dataset has n = " + std::to_string(ds.size()));
    }
    LooPredictions preds;
    preds.rows = loo.populated();
    if (preds.rows.empty()) {
        throw DomainError("predict_all: no populated leave-one-out rows");
    }
    preds.n = ds.size();
    preds.d = output_dim(loo.config->model, ds.num_classes);
    preds.values.resize(static_cast<Eigen::Index>(preds.rows.size()), static_cast<Eigen::Index>(preds.n * preds.d));
    for (std::size_t r = 0; r < preds.rows.size(); ++r) {
        const Vector w = loo.weights.row(static_cast<Eigen::Index>(preds.rows[r])).transpose();
        const Matrix out = predict(loo.config->model, w, ds.features, ds.num_classes);
        // j ascending, then output coordinate ascending
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = out;
        preds.values.row(static_cast<Eigen::Index>(r)) =
            Eigen::Map<const Eigen::RowVectorXd>(rm.data(), rm.size());
    }
    return preds;
}

double default_damping(const Matrix& hess) {
    return 1e-4 * hess.trace() / static_cast<double>(hess.rows());
}

Matrix influence_from(const Matrix& hess, const Matrix& grads, std::size_t n, double damping) {
    if (hess.rows() != hess.cols() || grads.cols() != hess.rows()) {
        throw DomainError("influence: Hessian and gradient dimensions disagree");
    }
    const double lam = damping < 0.0 ? default_damping(hess) : damping;
    Matrix a = hess;
    a.diagonal().array() += lam;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("influence: damped Hessian is not positive-definite; increase the damping");
    }
    const Matrix solved = llt.solve(grads.transpose());
    return solved.transpose() / static_cast<double>(n);
}

Matrix influence_loo(const Vector& w_star, const Dataset& ds, const ModelSpec& model, double damping) {
    const Matrix h = hessian(model, w_star, ds);
    Matrix grads(static_cast<Eigen::Index>(ds.size()), w_star.size());
    for (Eigen::Index i = 0; i < grads.rows(); ++i) {
        grads.row(i) = per_sample_gradient(model, w_star, ds.features.row(i).transpose(), ds.labels(i),
                                           ds.num_classes)
                           .transpose();
    }
    return influence_from(h, grads, ds.size(), damping);
}

SgdTrace sgd_divergence(const Dataset& ds, const TrainConfig& config, std::size_t i, std::size_t j) {
    config.validate();
    if (config.optimizer.kind != OptimizerSpec::Kind::sgd || !config.optimizer.step_clip) {
        throw ConfigError("sgd_divergence needs an sgd optimizer with step_clip set");
    }
    const LooView vi(ds, i);
    const LooView vj(ds, j);
    const Matrix xi = vi.features();
    const Vector yi = vi.labels();
    const Matrix xj = vj.features();
    const Vector yj = vj.labels();
    SgdRunner ri(xi, yi, ds.num_classes, config);
    SgdRunner rj(xj, yj, ds.num_classes, config);
    SgdTrace trace;
    for (int t = 0; t < config.optimizer.steps; ++t) {
        trace.update_norms_i.push_back(ri.step());
        trace.update_norms_j.push_back(rj.step());
        trace.divergence.push_back((ri.weights() - rj.weights()).norm());
    }
    return trace;
}

std::string loo_weights_to_csv(const LooWeights& loo) {
    std::string out = "index";
    for (std::size_t c = 0; c < loo.k(); ++c) {
        out += ",w" + std::to_string(c);
    }
    out += '\n';
    auto row = [&](const std::string& label, const Eigen::Ref<const Eigen::RowVectorXd>& w) {
        out += label;
        for (Eigen::Index c = 0; c < w.size(); ++c) {
            out += ',';
            out += io::format_double(w(c));
        }
        out += '\n';
    };
    for (std::size_t i : loo.populated()) {
        row(std::to_string(i), loo.weights.row(static_cast<Eigen::Index>(i)));
    }
    if (loo.full_weights.size() == loo.weights.cols() && loo.full_weights.size() > 0) {
        row("full", loo.full_weights.transpose());
    }
    return out;
}

void write_loo_weights_csv(const LooWeights& loo, const std::filesystem::path& path) {
    io::write_file(path, loo_weights_to_csv(loo));
}

LooWeights read_loo_weights_csv(const std::filesystem::path& path) {
    const std::string file = path.string();
    const auto lines = io::read_lines(path);
    if (lines.empty()) {
        throw ParseError(file, 1, "missing header");
    }
    const auto header = io::split(lines[0], ',');
    if (header.size() < 2 || io::trim(header[0]) != "index") {
        throw ParseError(file, 1, "header must be index,w0,...,w{K-1}");
    }
    const std::size_t k = header.size() - 1;
    for (std::size_t c = 0; c < k; ++c) {
        if (io::trim(header[c + 1]) != "w" + std::to_string(c)) {
            throw ParseError(file, 1, "expected column 'w" + std::to_string(c) + "'");
        }
    }
    std::map<std::size_t, Vector> rows;
    Vector full;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (io::trim(lines[li]).empty()) continue;
        const auto fields = io::split(lines[li], ',');
        if (fields.size() != k + 1) {
            throw ParseError(file, li + 1,
                             "expected " + std::to_string(k + 1) + " fields, got " + std::to_string(fields.size()));
        }
        Vector w(static_cast<Eigen::Index>(k));
        for (std::size_t c = 0; c < k; ++c) {
            w(static_cast<Eigen::Index>(c)) = io::parse_double(fields[c + 1], file, li + 1);
        }
        if (io::trim(fields[0]) == "full") {
            full = std::move(w);
            continue;
        }
        const long long idx = io::parse_int(fields[0], file, li + 1);
        if (idx < 0) {
            throw ParseError(file, li + 1, "negative index");
        }
        if (!rows.emplace(static_cast<std::size_t>(idx), std::move(w)).second) {
            throw ParseError(file, li + 1, "duplicate index " + std::to_string(idx));
        }
    }
    if (rows.empty()) {
        throw ParseError(file, lines.size(), "no leave-one-out rows");
    }
    LooWeights loo;
    const std::size_t n = rows.rbegin()->first + 1;
    loo.weights = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    loo.present.assign(n, false);
    for (const auto& [i, w] : rows) {
        loo.weights.row(static_cast<Eigen::Index>(i)) = w.transpose();
        loo.present[i] = true;
    }
    loo.full_weights = std::move(full);
    return loo;
}

std::string loo_predictions_to_csv(const LooPredictions& preds) {
    std::string out = "i,j";
    for (std::size_t c = 0; c < preds.d; ++c) {
        out += ",p" + std::to_string(c);
    }
    out += '\n';
    for (std::size_t r = 0; r < preds.rows.size(); ++r) {
        for (std::size_t j = 0; j < preds.n; ++j) {
            out += std::to_string(preds.rows[r]);
            out += ',';
            out += std::to_string(j);
            for (std::size_t c = 0; c < preds.d; ++c) {
                out += ',';
                out += io::format_double(preds.at(r, j, c));
            }
            out += '\n';
        }
    }
    return out;
}

void write_loo_predictions_csv(const LooPredictions& preds, const std::filesystem::path& path) {
    io::write_file(path, loo_predictions_to_csv(preds));
}

LooPredictions read_loo_predictions_csv(const std::filesystem::path& path) {
    const std::string file = path.string();
    const auto lines = io::read_lines(path);
    if (lines.empty()) {
        throw ParseError(file, 1, "missing header");
    }
    const auto header = io::split(lines[0], ',');
    if (header.size() < 3 || io::trim(header[0]) != "i" || io::trim(header[1]) != "j") {
        throw ParseError(file, 1, "header must be i,j,p0,...,p{d-1}");
    }
    const std::size_t d = header.size() - 2;
    for (std::size_t c = 0; c < d; ++c) {
        if (io::trim(header[c + 2]) != "p" + std::to_string(c)) {
            throw ParseError(file, 1, "expected column 'p" + std::to_string(c) + "'");
        }
    }
    std::map<std::size_t, std::map<std::size_t, std::vector<double>>> cells;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (io::trim(lines[li]).empty()) continue;
        const auto fields = io::split(lines[li], ',');
        if (fields.size() != d + 2) {
            throw ParseError(file, li + 1,
                             "expected " + std::to_string(d + 2) + " fields, got " + std::to_string(fields.size()));
        }
        const long long i = io::parse_int(fields[0], file, li + 1);
        const long long j = io::parse_int(fields[1], file, li + 1);
        if (i < 0 || j < 0) {
            throw ParseError(file, li + 1, "negative index");
        }
        std::vector<double> v(d);
        for (std::size_t c = 0; c < d; ++c) {
            v[c] = io::parse_double(fields[c + 2], file, li + 1);
        }
        if (!cells[static_cast<std::size_t>(i)].emplace(static_cast<std::size_t>(j), std::move(v)).second) {
            throw ParseError(file, li + 1, "duplicate entry (" + std::to_string(i) + "," + std::to_string(j) + ")");
        }
    }
    if (cells.empty()) {
        throw ParseError(file, lines.size(), "no prediction rows");
    }
    LooPredictions preds;
    preds.d = d;
    preds.n = cells.begin()->second.size();
    preds.values.resize(static_cast<Eigen::Index>(cells.size()), static_cast<Eigen::Index>(preds.n * d));
    Eigen::Index r = 0;
    for (const auto& [i, row] : cells) {
        if (row.size() != preds.n || row.rbegin()->first != preds.n - 1) {
            throw DomainError("prediction tensor row " + std::to_string(i) + " is missing entries");
        }
        preds.rows.push_back(i);
        for (const auto& [j, v] : row) {
            for (std::size_t c = 0; c < d; ++c) {
                preds.values(r, static_cast<Eigen::Index>(j * d + c)) = v[c];
            }
        }
        ++r;
    }
    return preds;
}

}  // namespace loocmi
