#include "loocmi/report.hpp"

#include "loocmi/error.hpp"
#include "loocmi/io.hpp"

namespace loocmi {

namespace {

Json real(double v) { return io::format_double(v); }

Json opt_real(const std::optional<double>& v) { return v ? real(*v) : Json(nullptr); }

Json mc_json(const McEstimate& e) {
    Json j;
    j["value"] = real(e.value);
    j["std_err"] = real(e.std_err);
    j["samples"] = e.samples;
    j["seed"] = e.seed;
    return j;
}

}  // namespace

double json_real(const Json& j) {
    if (j.is_string()) {
        return io::parse_double(j.get<std::string>(), "<json>", 0);
    }
    if (j.is_number()) {
        return j.get<double>();
    }
    throw DomainError("json value is not a real");
}

Json report_to_json(const BoundReport& r) {
    Json j;
    j["units"] = "nats";
    j["experiment"] = r.experiment;
    j["generator"] = r.generator;
    j["seed"] = r.seed;
    j["n"] = r.n;
    j["p"] = r.p;
    j["model"] = r.model;
    j["optimizer"] = r.optimizer;

    Json loo;
    loo["mode"] = r.subset ? "subset" : "full";
    loo["rows"] = r.loo_rows;
    loo["log_count"] = r.subset ? "ln(rows) replaces ln(n)" : "ln(n)";
    j["leave_one_out"] = loo;

    if (r.loss) {
        Json l;
        l["id"] = r.loss->name();
        l["cap"] = real(r.loss->cap);
        l["clipped"] = r.loss->clipped();
        j["loss"] = l;
    } else {
        j["loss"] = nullptr;
    }

    Json noise;
    noise["weights"] = r.weight_noise;
    noise["weight_sigma"] = opt_real(r.weight_sigma);
    noise["prediction_sigma"] = opt_real(r.prediction_sigma);
    noise["hessian_damping"] = opt_real(r.damping);
    j["noise"] = noise;

    j["loo_cmi_upper"] = opt_real(r.loo_cmi_upper);
    j["floo_cmi_upper"] = opt_real(r.floo_cmi_upper);
    j["jensen_upper"] = opt_real(r.jensen_weights);
    j["jensen_upper_predictions"] = opt_real(r.jensen_predictions);
    j["gen_bound_weights"] = opt_real(r.gen_bound_weights);
    j["gen_bound_predictions"] = opt_real(r.gen_bound_predictions);

    if (r.stability) {
        const auto& s = *r.stability;
        Json st;
        st["empirical"] = s.profile.empirical;
        st["epsilon"] = real(s.profile.epsilon);
        st["beta"] = real(s.profile.beta);
        st["beta1"] = real(s.profile.beta1);
        st["lipschitz_L"] = real(s.profile.lipschitz_L);
        st["d"] = s.profile.d;
        st["thm5"] = real(s.bounds.thm5);
        st["thm6"] = real(s.bounds.thm6);
        st["T"] = s.bounds.T;
        st["gamma"] = real(s.bounds.gamma);
        st["lemma5"] = opt_real(s.lemma5);
        j["stability_bounds"] = st;
    } else {
        j["stability_bounds"] = nullptr;
    }

    if (r.local) {
        Json lb;
        lb["value"] = real(r.local->local_bound);
        lb["loo_cmi_upper_hessian"] = real(r.local->loo_cmi_hessian);
        lb["damping"] = real(r.local->damping);
        j["local_bound"] = lb;
    } else {
        j["local_bound"] = nullptr;
    }

    if (r.gap) {
        const auto& g = *r.gap;
        Json m;
        m["loo_gap"] = real(g.loo_gap);
        m["loo_std_err"] = real(g.loo_std_err);
        m["loo_heldout_loss"] = real(g.loo_heldout_loss);
        m["heldout_gap"] = real(g.heldout_gap);
        m["heldout_std_err"] = real(g.heldout_std_err);
        m["train_loss"] = real(g.train_loss);
        m["test_loss"] = real(g.test_loss);
        j["measured_gap"] = m;
    } else {
        j["measured_gap"] = nullptr;
    }

    if (r.noisy_test_error) {
        Json ne;
        ne["value"] = real(r.noisy_test_error->value);
        ne["std_err"] = real(r.noisy_test_error->std_err);
        ne["draws"] = r.noisy_test_error->draws;
        j["noisy_test_error"] = ne;
    } else {
        j["noisy_test_error"] = nullptr;
    }

    if (r.loo_mc || r.floo_mc) {
        Json o;
        o["loo_mc"] = r.loo_mc ? mc_json(*r.loo_mc) : Json(nullptr);
        o["floo_mc"] = r.floo_mc ? mc_json(*r.floo_mc) : Json(nullptr);
        j["oracle"] = o;
    } else {
        j["oracle"] = nullptr;
    }
    return j;
}

std::string report_to_text(const BoundReport& r) { return report_to_json(r).dump(2) + "\n"; }

void write_report(const BoundReport& r, const std::filesystem::path& path) {
    io::write_file(path, report_to_text(r));
}

}  // namespace loocmi
