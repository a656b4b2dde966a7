#include "loocmi/config.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "loocmi/error.hpp"
#include "loocmi/io.hpp"

namespace loocmi {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

double to_real(std::string_view v, const std::string& where) {
    try {
        return io::parse_double(v, where, 0);
    } catch (const ParseError&) {
        throw ConfigError(where + ": expected a number, got '" + std::string(v) + "'");
    }
}

long long to_int(std::string_view v, const std::string& where) {
    try {
        return io::parse_int(v, where, 0);
    } catch (const ParseError&) {
        throw ConfigError(where + ": expected an integer, got '" + std::string(v) + "'");
    }
}

std::size_t to_size(std::string_view v, const std::string& where) {
    const long long x = to_int(v, where);
    if (x < 0) {
        throw ConfigError(where + ": expected a non-negative integer");
    }
    return static_cast<std::size_t>(x);
}

bool to_bool(std::string_view v, const std::string& where) {
    const std::string s = lower(v);
    if (s == "on" || s == "true" || s == "yes" || s == "1") return true;
    if (s == "off" || s == "false" || s == "no" || s == "0") return false;
    throw ConfigError(where + ": expected on/off, got '" + std::string(v) + "'");
}

template <class T, class F>
std::vector<T> to_list(std::string_view v, const std::string& where, F convert) {
    std::vector<T> out;
    for (const auto item : io::split(v, ',')) {
        const auto t = io::trim(item);
        if (t.empty()) {
            throw ConfigError(where + ": empty list entry");
        }
        out.push_back(convert(t, where));
    }
    if (out.empty()) {
        throw ConfigError(where + ": empty list");
    }
    return out;
}

template <class T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& f) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += f(v[i]);
    }
    return out;
}

using Setter = std::function<void(ExperimentConfig&, std::string_view, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"name", [](auto& c, auto v, auto&) { c.name = std::string(v); }},
        {"generator", [](auto& c, auto v, auto&) { c.generator = std::string(v); }},
        {"seeds", [](auto& c, auto v, auto& w) {
             c.seeds = to_list<std::uint64_t>(v, w, [](std::string_view t, const std::string& ww) {
                 return static_cast<std::uint64_t>(to_size(t, ww));
             });
         }},
        {"n", [](auto& c, auto v, auto& w) { c.sizes = to_list<std::size_t>(v, w, to_size); }},
        {"p", [](auto& c, auto v, auto& w) { c.p = to_size(v, w); }},
        {"blob_mu", [](auto& c, auto v, auto& w) { c.generator_options.blob_mu = to_real(v, w); }},
        {"xor_mu", [](auto& c, auto v, auto& w) { c.generator_options.xor_mu = to_real(v, w); }},
        {"label_noise", [](auto& c, auto v, auto& w) { c.generator_options.noise_std = to_real(v, w); }},
        {"test_size", [](auto& c, auto v, auto& w) { c.test_size = to_size(v, w); }},
        {"model", [](auto& c, auto v, auto& w) {
             const std::string m = lower(v);
             if (m == "ridge") c.train.model.kind = ModelSpec::Kind::ridge;
             else if (m == "logistic") c.train.model.kind = ModelSpec::Kind::logistic;
             else if (m == "mlp") c.train.model.kind = ModelSpec::Kind::mlp;
             else throw ConfigError(w + ": unknown model '" + std::string(v) + "' (ridge, logistic, mlp)");
         }},
        {"lambda", [](auto& c, auto v, auto& w) { c.train.model.lambda = to_real(v, w); }},
        {"hidden", [](auto& c, auto v, auto& w) { c.train.model.hidden = static_cast<int>(to_int(v, w)); }},
        {"optimizer", [](auto& c, auto v, auto& w) {
             const std::string m = lower(v);
             if (m == "closed-form") c.train.optimizer.kind = OptimizerSpec::Kind::closed_form;
             else if (m == "full-batch-gd") c.train.optimizer.kind = OptimizerSpec::Kind::full_batch_gd;
             else if (m == "sgd") c.train.optimizer.kind = OptimizerSpec::Kind::sgd;
             else throw ConfigError(w + ": unknown optimizer '" + std::string(v) + "' (closed-form, full-batch-gd, sgd)");
         }},
        {"eta", [](auto& c, auto v, auto& w) { c.train.optimizer.eta = to_real(v, w); }},
        {"steps", [](auto& c, auto v, auto& w) { c.train.optimizer.steps = static_cast<int>(to_int(v, w)); }},
        {"batch", [](auto& c, auto v, auto& w) { c.train.optimizer.batch = static_cast<int>(to_int(v, w)); }},
        {"step_clip", [](auto& c, auto v, auto& w) {
             if (lower(v) == "none") c.train.optimizer.step_clip.reset();
             else c.train.optimizer.step_clip = to_real(v, w);
         }},
        {"momentum", [](auto& c, auto v, auto& w) { c.train.optimizer.momentum = to_real(v, w); }},
        {"init_seed", [](auto& c, auto v, auto& w) { c.train.init_seed = to_size(v, w); }},
        {"sgd_order_seed", [](auto& c, auto v, auto& w) { c.train.sgd_order_seed = to_size(v, w); }},
        {"weight_noise", [](auto& c, auto v, auto& w) {
             const std::string m = lower(v);
             if (m == "isotropic") c.weight_noise = WeightNoise::isotropic;
             else if (m == "hessian") c.weight_noise = WeightNoise::hessian;
             else throw ConfigError(w + ": unknown weight_noise '" + std::string(v) + "' (isotropic, hessian)");
         }},
        {"weight_sigma", [](auto& c, auto v, auto& w) { c.weight_sigma = to_real(v, w); }},
        {"sigma", [](auto& c, auto v, auto& w) { c.sigmas = to_list<double>(v, w, to_real); }},
        {"damping", [](auto& c, auto v, auto& w) {
             c.damping = lower(v) == "auto" ? -1.0 : to_real(v, w);
         }},
        {"loss", [](auto& c, auto v, auto&) { c.loss = std::string(v); }},
        {"loss_cap", [](auto& c, auto v, auto& w) {
             c.loss_cap = lower(v) == "auto" ? 0.0 : to_real(v, w);
         }},
        {"loo", [](auto& c, auto v, auto& w) {
             const std::string m = lower(v);
             if (m == "full") c.subset = false;
             else if (m == "subset") c.subset = true;
             else throw ConfigError(w + ": loo must be full or subset");
         }},
        {"subset_size", [](auto& c, auto v, auto& w) { c.subset_size = to_size(v, w); }},
        {"subset_seed", [](auto& c, auto v, auto& w) { c.subset_seed = to_size(v, w); }},
        {"oracle", [](auto& c, auto v, auto& w) { c.oracle = to_bool(v, w); }},
        {"oracle_samples", [](auto& c, auto v, auto& w) { c.oracle_samples = to_int(v, w); }},
        {"oracle_seed", [](auto& c, auto v, auto& w) { c.oracle_seed = to_size(v, w); }},
        {"noise_draws", [](auto& c, auto v, auto& w) { c.noise_draws = static_cast<int>(to_int(v, w)); }},
        {"lipschitz_L", [](auto& c, auto v, auto& w) { c.lipschitz_L = to_real(v, w); }},
    };
    return table;
}

std::string model_name(ModelSpec::Kind k) {
    switch (k) {
        case ModelSpec::Kind::ridge: return "ridge";
        case ModelSpec::Kind::logistic: return "logistic";
        case ModelSpec::Kind::mlp: return "mlp";
    }
    return "?";
}

}  // namespace

std::vector<double> parse_real_list(const std::string& text) {
    return to_list<double>(text, "list", to_real);
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
    return to_list<std::size_t>(text, "list", to_size);
}

void ExperimentConfig::validate() const {
    if (name.empty() || name.find_first_of("/\\") != std::string::npos) {
        throw ConfigError("name must be non-empty and contain no path separators");
    }
    if (seeds.empty()) {
        throw ConfigError("at least one seed is required");
    }
    if (sizes.empty()) {
        throw ConfigError("at least one dataset size n is required");
    }
    for (std::size_t n : sizes) {
        if (n < 2) throw ConfigError("every n must be >= 2");
        if (subset && subset_size > n) {
            throw ConfigError("subset_size " + std::to_string(subset_size) + " exceeds n = " + std::to_string(n));
        }
    }
    if (subset && subset_size < 2) {
        throw ConfigError("subset_size must be >= 2");
    }
    if (p < 1) {
        throw ConfigError("p must be >= 1");
    }
    if (test_size < 1) {
        throw ConfigError("test_size must be >= 1");
    }
    if (sigmas.empty()) {
        throw ConfigError("at least one sigma is required");
    }
    for (double s : sigmas) {
        if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("every sigma must be finite and > 0");
    }
    if (!(weight_sigma > 0.0) || !std::isfinite(weight_sigma)) {
        throw ConfigError("weight_sigma must be finite and > 0");
    }
    if (oracle && oracle_samples < 1000) {
        throw ConfigError("oracle_samples must be >= 1000");
    }
    if (noise_draws < 1) {
        throw ConfigError("noise_draws must be >= 1");
    }
    if (!(lipschitz_L > 0.0)) {
        throw ConfigError("lipschitz_L must be > 0");
    }
    LossSpec::parse(loss, loss_cap);
    train.validate();
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        const std::string_view body = io::trim(std::string_view(line).substr(0, hash));
        if (body.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(where + ": expected 'key = value'");
        }
        const std::string key(io::trim(body.substr(0, eq)));
        const std::string_view value = io::trim(body.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) {
            throw ConfigError(where + ": unknown key '" + key + "'");
        }
        if (seen.count(key)) {
            throw ConfigError(where + ": key '" + key + "' repeats line " + std::to_string(seen[key]));
        }
        seen[key] = lineno;
        if (value.empty()) {
            throw ConfigError(where + ": key '" + key + "' has no value");
        }
        it->second(cfg, value, where);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::vector<std::string> lines;
    try {
        lines = io::read_lines(path);
    } catch (const std::exception& e) {
        throw ConfigError("cannot read config " + path.string() + ": " + e.what());
    }
    std::string text;
    for (const auto& l : lines) {
        text += l;
        text += '\n';
    }
    return parse_config(text, path.string());
}

std::string config_to_text(const ExperimentConfig& c) {
    const auto f = [](const double& x) { return io::format_double(x); };
    const auto z = [](const std::size_t& x) { return std::to_string(x); };
    const auto u = [](const std::uint64_t& x) { return std::to_string(x); };
    std::ostringstream o;
    o << "name = " << c.name << '\n'
      << "generator = " << c.generator << '\n'
      << "seeds = " << join<std::uint64_t>(c.seeds, u) << '\n'
      << "n = " << join<std::size_t>(c.sizes, z) << '\n'
      << "p = " << c.p << '\n'
      << "blob_mu = " << f(c.generator_options.blob_mu) << '\n'
      << "xor_mu = " << f(c.generator_options.xor_mu) << '\n'
      << "label_noise = " << f(c.generator_options.noise_std) << '\n'
      << "test_size = " << c.test_size << '\n'
      << "model = " << model_name(c.train.model.kind) << '\n'
      << "lambda = " << f(c.train.model.lambda) << '\n'
      << "hidden = " << c.train.model.hidden << '\n'
      << "optimizer = " << c.train.optimizer.name() << '\n'
      << "eta = " << f(c.train.optimizer.eta) << '\n'
      << "steps = " << c.train.optimizer.steps << '\n'
      << "batch = " << c.train.optimizer.batch << '\n'
      << "step_clip = " << (c.train.optimizer.step_clip ? f(*c.train.optimizer.step_clip) : "none") << '\n'
      << "momentum = " << f(c.train.optimizer.momentum) << '\n'
      << "init_seed = " << c.train.init_seed << '\n'
      << "sgd_order_seed = " << c.train.sgd_order_seed << '\n'
      << "weight_noise = " << (c.weight_noise == WeightNoise::hessian ? "hessian" : "isotropic") << '\n'
      << "weight_sigma = " << f(c.weight_sigma) << '\n'
      << "sigma = " << join<double>(c.sigmas, f) << '\n'
      << "damping = " << (c.damping < 0.0 ? "auto" : f(c.damping)) << '\n'
      << "loss = " << c.loss << '\n'
      << "loss_cap = " << (c.loss_cap > 0.0 ? f(c.loss_cap) : "auto") << '\n'
      << "loo = " << (c.subset ? "subset" : "full") << '\n'
      << "subset_size = " << c.subset_size << '\n'
      << "subset_seed = " << c.subset_seed << '\n'
      << "oracle = " << (c.oracle ? "on" : "off") << '\n'
      << "oracle_samples = " << c.oracle_samples << '\n'
      << "oracle_seed = " << c.oracle_seed << '\n'
      << "noise_draws = " << c.noise_draws << '\n'
      << "lipschitz_L = " << f(c.lipschitz_L) << '\n';
    return o.str();
}

}  // namespace loocmi
