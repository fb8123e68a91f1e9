#include "hybridtarget/config.hpp"

#include "hybridtarget/error.hpp"

#include <fstream>
#include <set>

namespace ht {

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); }

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
    if (!j.is_object()) bad(where + " must be a JSON object");
    for (const auto& item : j.items()) {
        if (!allowed.contains(item.key())) bad("unknown key '" + item.key() + "' in " + where);
    }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        bad("wrong type for '" + std::string(key) + "' in " + where);
    }
}

OmegaProbs probs_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) bad(where + " must be an array of 3 numbers");
    OmegaProbs out{};
    for (std::size_t l = 0; l < 3; ++l) {
        if (!j[l].is_number()) bad(where + " must be an array of 3 numbers");
        out[l] = j[l].get<double>();
    }
    return out;
}

json probs_to_json(const OmegaProbs& p) { return json::array({p[0], p[1], p[2]}); }

std::pair<double, double> normal_from_json(const json& j, const std::string& where) {
    check_keys(j, where, {"mean", "variance"});
    if (!j.contains("mean") || !j.contains("variance") || !j["mean"].is_number() || !j["variance"].is_number()) {
        bad(where + " needs numeric 'mean' and 'variance'");
    }
    return {j["mean"].get<double>(), j["variance"].get<double>()};
}

} // namespace

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        bad(path.string() + ": " + e.what());
    }
}

ModelSpec model_from_json(const json& j, ModelSpec spec) {
    const std::string where = "model";
    check_keys(j, where, {"multi_ranker", "auxiliary", "elite", "delta_prior_sd", "delta_prior", "omega_support",
                          "default_omega_prior", "omega_prior", "prior_source", "period"});
    read(j, "multi_ranker", spec.multi_ranker, where);
    read(j, "auxiliary", spec.auxiliary, where);
    read(j, "elite", spec.elite, where);
    read(j, "delta_prior_sd", spec.delta_prior_sd, where);
    read(j, "prior_source", spec.prior_source, where);
    read(j, "period", spec.period, where);
    if (auto it = j.find("delta_prior"); it != j.end()) {
        if (!it->is_object()) bad("model.delta_prior must be an object");
        for (const auto& item : it->items()) spec.delta_prior[item.key()] = normal_from_json(item.value(), "delta_prior." + item.key());
    }
    if (auto it = j.find("omega_support"); it != j.end()) spec.omega_support = probs_from_json(*it, "omega_support");
    if (auto it = j.find("default_omega_prior"); it != j.end()) spec.default_omega_prior = probs_from_json(*it, "default_omega_prior");
    if (auto it = j.find("omega_prior"); it != j.end()) {
        if (!it->is_object()) bad("model.omega_prior must be an object");
        for (const auto& item : it->items()) spec.omega_prior[item.key()] = probs_from_json(item.value(), "omega_prior." + item.key());
    }
    spec.validate();
    return spec;
}

json model_to_json(const ModelSpec& spec) {
    json j{{"multi_ranker", spec.multi_ranker},
           {"auxiliary", spec.auxiliary},
           {"elite", spec.elite},
           {"delta_prior_sd", spec.delta_prior_sd},
           {"omega_support", probs_to_json(spec.omega_support)},
           {"default_omega_prior", probs_to_json(spec.default_omega_prior)},
           {"prior_source", spec.prior_source},
           {"period", spec.period}};
    json dp = json::object();
    for (const auto& [name, mv] : spec.delta_prior) dp[name] = {{"mean", mv.first}, {"variance", mv.second}};
    j["delta_prior"] = dp;
    json op = json::object();
    for (const auto& [r, p] : spec.omega_prior) op[r] = probs_to_json(p);
    j["omega_prior"] = op;
    return j;
}

McmcConfig mcmc_from_json(const json& j, McmcConfig cfg) {
    const std::string where = "mcmc";
    check_keys(j, where, {"iterations", "burn_in", "seed", "retain_latent", "check_rank_consistency"});
    read(j, "iterations", cfg.total_iterations, where);
    read(j, "burn_in", cfg.burn_in, where);
    read(j, "seed", cfg.seed, where);
    read(j, "retain_latent", cfg.retain_latent, where);
    read(j, "check_rank_consistency", cfg.check_rank_consistency, where);
    cfg.validate();
    return cfg;
}

json mcmc_to_json(const McmcConfig& cfg) {
    return {{"iterations", cfg.total_iterations},
            {"burn_in", cfg.burn_in},
            {"seed", cfg.seed},
            {"retain_latent", cfg.retain_latent},
            {"check_rank_consistency", cfg.check_rank_consistency}};
}

FitConfig fit_config_from_json(const json& j) {
    check_keys(j, "fit config", {"model", "mcmc", "standardize", "column_kinds"});
    FitConfig cfg;
    if (j.contains("model")) cfg.model = model_from_json(j["model"]);
    if (j.contains("mcmc")) cfg.mcmc = mcmc_from_json(j["mcmc"]);
    read(j, "standardize", cfg.standardize, "fit config");
    if (auto it = j.find("column_kinds"); it != j.end()) {
        if (!it->is_object()) bad("column_kinds must be an object");
        for (const auto& item : it->items()) {
            const auto kind = item.value().is_string() ? item.value().get<std::string>() : std::string();
            if (kind == "binary") cfg.column_kinds[item.key()] = ColumnKind::Binary;
            else if (kind == "continuous") cfg.column_kinds[item.key()] = ColumnKind::Continuous;
            else bad("column_kinds." + item.key() + " must be \"binary\" or \"continuous\"");
        }
    }
    return cfg;
}

GenConfig gen_config_from_json(const json& j) {
    const std::string where = "generator config";
    check_keys(j, where, {"n_train", "n_test", "n_aux", "households_per_community", "n_binary", "n_continuous", "n_rankers",
                          "delta_true", "omega_true", "alpha_sd", "elite", "elite_prevalence", "elite_effect", "gamma_true",
                          "gamma_perturbation_sd", "phi_true", "sigma_psi_true", "survey_share", "quota_share",
                          "shuffled_rankers", "seed"});
    GenConfig cfg;
    read(j, "n_train", cfg.n_train, where);
    read(j, "n_test", cfg.n_test, where);
    read(j, "n_aux", cfg.n_aux, where);
    read(j, "households_per_community", cfg.households_per_community, where);
    read(j, "n_binary", cfg.n_binary, where);
    read(j, "n_continuous", cfg.n_continuous, where);
    read(j, "n_rankers", cfg.n_rankers, where);
    read(j, "delta_true", cfg.delta_true, where);
    read(j, "omega_true", cfg.omega_true, where);
    read(j, "alpha_sd", cfg.alpha_sd, where);
    read(j, "elite", cfg.elite, where);
    read(j, "elite_prevalence", cfg.elite_prevalence, where);
    read(j, "elite_effect", cfg.elite_effect, where);
    read(j, "gamma_true", cfg.gamma_true, where);
    read(j, "gamma_perturbation_sd", cfg.gamma_perturbation_sd, where);
    read(j, "phi_true", cfg.phi_true, where);
    read(j, "sigma_psi_true", cfg.sigma_psi_true, where);
    read(j, "survey_share", cfg.survey_share, where);
    read(j, "quota_share", cfg.quota_share, where);
    read(j, "shuffled_rankers", cfg.shuffled_rankers, where);
    read(j, "seed", cfg.seed, where);
    cfg.validate();
    return cfg;
}

json gen_config_to_json(const GenConfig& cfg) {
    return {{"n_train", cfg.n_train},
            {"n_test", cfg.n_test},
            {"n_aux", cfg.n_aux},
            {"households_per_community", cfg.households_per_community},
            {"n_binary", cfg.n_binary},
            {"n_continuous", cfg.n_continuous},
            {"n_rankers", cfg.n_rankers},
            {"delta_true", cfg.resolved_delta()},
            {"omega_true", cfg.resolved_omega()},
            {"alpha_sd", cfg.alpha_sd},
            {"elite", cfg.elite},
            {"elite_prevalence", cfg.elite_prevalence},
            {"elite_effect", cfg.elite_effect},
            {"gamma_true", cfg.gamma_true},
            {"gamma_perturbation_sd", cfg.gamma_perturbation_sd},
            {"phi_true", cfg.phi_true},
            {"sigma_psi_true", cfg.sigma_psi_true},
            {"survey_share", cfg.survey_share},
            {"quota_share", cfg.quota_share},
            {"shuffled_rankers", cfg.shuffled_rankers},
            {"seed", cfg.seed}};
}

ExperimentPlan plan_from_json(const json& j) {
    const std::string where = "experiment plan";
    check_keys(j, where, {"community_counts", "replications", "seed", "methods", "model", "multi_ranker", "mcmc",
                          "du_inflation", "du_shrink", "quota_rule", "quota_share", "threads", "splits"});
    ExperimentPlan plan;
    read(j, "community_counts", plan.community_counts, where);
    read(j, "replications", plan.replications, where);
    read(j, "seed", plan.seed, where);
    if (auto it = j.find("methods"); it != j.end()) {
        if (!it->is_array()) bad("methods must be an array of names");
        plan.methods.clear();
        for (const auto& m : *it) {
            if (!m.is_string()) bad("methods must be an array of names");
            plan.methods.push_back(parse_method(m.get<std::string>()));
        }
    }
    if (j.contains("model")) plan.model = model_from_json(j["model"]);
    if (auto it = j.find("multi_ranker"); it != j.end()) {
        if (it->is_boolean()) plan.multi_ranker = it->get<bool>();
        else if (!(it->is_string() && it->get<std::string>() == "auto")) bad("multi_ranker must be true, false or \"auto\"");
    }
    if (j.contains("mcmc")) plan.mcmc = mcmc_from_json(j["mcmc"], plan.mcmc);
    read(j, "du_inflation", plan.du_inflation, where);
    read(j, "du_shrink", plan.du_shrink, where);
    if (auto it = j.find("quota_rule"); it != j.end()) {
        const auto rule = it->is_string() ? it->get<std::string>() : std::string();
        if (rule == "truth_count") plan.quota_rule = QuotaRule::TruthCount;
        else if (rule == "share") plan.quota_rule = QuotaRule::Share;
        else bad("quota_rule must be \"truth_count\" or \"share\"");
    }
    read(j, "quota_share", plan.quota_share, where);
    read(j, "threads", plan.threads, where);
    if (auto it = j.find("splits"); it != j.end()) {
        check_keys(*it, "splits", {"train", "test", "aux"});
        read(*it, "train", plan.train_label, "splits");
        read(*it, "test", plan.test_label, "splits");
        read(*it, "aux", plan.aux_label, "splits");
    }
    plan.validate();
    return plan;
}

json prior_to_json(const UpdatedPrior& prior) {
    json delta = json::object();
    for (std::size_t p = 0; p < prior.covariate_names.size(); ++p) {
        const auto i = static_cast<Eigen::Index>(p);
        delta[prior.covariate_names[p]] = {{"mean", prior.delta.mean[i]}, {"variance", prior.delta.var[i]}};
    }
    json omega = json::object();
    for (std::size_t r = 0; r < prior.ranker_ids.size(); ++r) omega[prior.ranker_ids[r]] = probs_to_json(prior.omega[r]);
    json names = prior.covariate_names;
    return {{"period", prior.period},
            {"inflation", prior.inflation},
            {"shrink", prior.shrink},
            {"omega_support", probs_to_json(prior.omega_support)},
            {"covariates", names},
            {"delta", delta},
            {"omega", omega}};
}

UpdatedPrior prior_from_json(const json& j) {
    const std::string where = "prior file";
    check_keys(j, where, {"period", "inflation", "shrink", "omega_support", "covariates", "delta", "omega"});
    UpdatedPrior prior;
    read(j, "period", prior.period, where);
    read(j, "inflation", prior.inflation, where);
    read(j, "shrink", prior.shrink, where);
    if (auto it = j.find("omega_support"); it != j.end()) prior.omega_support = probs_from_json(*it, "omega_support");
    if (!j.contains("delta") || !j["delta"].is_object()) bad("prior file needs a 'delta' object");
    const auto& delta = j["delta"];
    if (j.contains("covariates")) {
        read(j, "covariates", prior.covariate_names, where);
    } else {
        for (const auto& item : delta.items()) prior.covariate_names.push_back(item.key());
    }
    const auto p = static_cast<Eigen::Index>(prior.covariate_names.size());
    prior.delta.mean.resize(p);
    prior.delta.var.resize(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        const auto& name = prior.covariate_names[static_cast<std::size_t>(i)];
        if (!delta.contains(name)) bad("prior file has no delta entry for '" + name + "'");
        const auto [m, v] = normal_from_json(delta[name], "delta." + name);
        if (!(v > 0.0)) bad("prior variance for '" + name + "' must be positive");
        prior.delta.mean[i] = m;
        prior.delta.var[i] = v;
    }
    if (auto it = j.find("omega"); it != j.end()) {
        if (!it->is_object()) bad("'omega' must be an object");
        for (const auto& item : it->items()) {
            prior.ranker_ids.push_back(item.key());
            prior.omega.push_back(probs_from_json(item.value(), "omega." + item.key()));
        }
    }
    return prior;
}

} // namespace ht
