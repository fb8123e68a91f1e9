#include "hybridtarget/hybridtarget.h"

#include "hybridtarget/config.hpp"
#include "hybridtarget/csv.hpp"
#include "hybridtarget/data.hpp"
#include "hybridtarget/dynamic_update.hpp"
#include "hybridtarget/error.hpp"
#include "hybridtarget/experiment.hpp"
#include "hybridtarget/gibbs.hpp"
#include "hybridtarget/outputs.hpp"
#include "hybridtarget/synthetic.hpp"
#include "hybridtarget/targeting.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <new>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;

struct ht_dataset {
    ht::Dataset data;
};

struct ht_fit_config {
    ht::FitConfig cfg;
};

struct ht_posterior {
    ht::PosteriorSamples samples;
    std::optional<ht::Dataset> data; // fitted (scaled) data; absent for loaded samples
    ht::ScalingInfo scaling;
    std::uint64_t seed = 0;
};

namespace {

thread_local std::string g_last_error;

ht_status fail(ht_status status, const std::string& message) {
    g_last_error = message;
    return status;
}

template <typename F>
ht_status guarded(F&& body) {
    try {
        g_last_error.clear();
        body();
        return HT_OK;
    } catch (const ht::Error& e) {
        return fail(static_cast<ht_status>(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(HT_INTERNAL, "out of memory");
    } catch (const fs::filesystem_error& e) {
        return fail(HT_IO, e.what());
    } catch (const std::exception& e) {
        return fail(HT_INTERNAL, e.what());
    } catch (...) {
        return fail(HT_INTERNAL, "unknown failure");
    }
}

void require(const void* p, const char* what) {
    if (p == nullptr) throw ht::Error(ht::ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

std::optional<fs::path> opt_path(const char* p) {
    if (p == nullptr || *p == '\0') return std::nullopt;
    return fs::path(p);
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ht::Error(ht::ErrorCode::Io, "cannot read " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr) throw ht::Error(ht::ErrorCode::Internal, "cannot allocate digest context");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 15];
    while (in) {
        in.read(buf, sizeof buf);
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ht::ScalingInfo identity_scaling(const std::vector<std::string>& names) {
    ht::ScalingInfo info;
    for (const auto& n : names) info.columns.push_back({n, ht::ColumnKind::Continuous, 1.0});
    return info;
}

std::string fit_log(const ht_posterior& post) {
    const auto& s = post.samples;
    std::ostringstream out;
    out << "prior_source: " << s.spec.prior_source << '\n';
    out << "period: " << s.spec.period << '\n';
    out << "multi_ranker: " << (s.spec.multi_ranker ? "true" : "false") << '\n';
    out << "auxiliary: " << (s.spec.auxiliary ? "true" : "false") << '\n';
    out << "iterations: " << s.config.total_iterations << '\n';
    out << "burn_in: " << s.config.burn_in << '\n';
    out << "retained_draws: " << s.draws() << '\n';
    out << "seed: " << post.seed << '\n';
    out << "ranked_households: " << s.household_ids.size() << '\n';
    out << "rankers: " << s.ranker_ids.size() << '\n';
    out << "covariates:";
    for (const auto& n : s.covariate_names) out << ' ' << n;
    out << '\n';
    if (s.spec.multi_ranker && s.omega.size() > 0) {
        const auto w = s.omega_mean();
        for (std::size_t r = 0; r < s.ranker_ids.size(); ++r) {
            out << "omega_mean[" << s.ranker_ids[r] << "]: " << ht::csv::format_double(w[static_cast<Eigen::Index>(r)]) << '\n';
        }
    }
    return out.str();
}

} // namespace

extern "C" {

const char* ht_last_error(void) { return g_last_error.c_str(); }

const char* ht_status_name(ht_status status) {
    static thread_local std::string name;
    name = std::string(ht::error_code_name(static_cast<ht::ErrorCode>(status)));
    return name.c_str();
}

const char* ht_version(void) { return "0.1.0"; }

int ht_status_is_usage_error(ht_status status) {
    return status == HT_INVALID_ARGUMENT || status == HT_INVALID_CONFIG ? 1 : 0;
}

ht_status ht_dataset_load(const char* census_path, const char* rankings_path, const char* survey_path,
                          const char* quotas_path, ht_dataset** out) {
    return guarded([&] {
        require(census_path, "census_path");
        require(rankings_path, "rankings_path");
        require(out, "out");
        auto handle = std::make_unique<ht_dataset>();
        handle->data = ht::load_dataset(census_path, rankings_path, opt_path(survey_path), opt_path(quotas_path));
        *out = handle.release();
    });
}

ht_status ht_dataset_counts(const ht_dataset* data, size_t* households, size_t* covariates, size_t* rankings,
                            size_t* survey_rows) {
    return guarded([&] {
        require(data, "data");
        if (households) *households = data->data.households.size();
        if (covariates) *covariates = data->data.covariate_count();
        if (rankings) *rankings = data->data.rankings.size();
        if (survey_rows) *survey_rows = data->data.survey.size();
    });
}

void ht_dataset_free(ht_dataset* data) { delete data; }

ht_status ht_fit_config_load(const char* config_path, ht_fit_config** out) {
    return guarded([&] {
        require(out, "out");
        auto handle = std::make_unique<ht_fit_config>();
        if (auto p = opt_path(config_path)) handle->cfg = ht::fit_config_from_json(ht::load_json(*p));
        *out = handle.release();
    });
}

ht_status ht_fit_config_set_iterations(ht_fit_config* cfg, int total, int burn_in) {
    return guarded([&] {
        require(cfg, "cfg");
        ht::McmcConfig m = cfg->cfg.mcmc;
        m.total_iterations = total;
        m.burn_in = burn_in;
        m.validate();
        cfg->cfg.mcmc = m;
    });
}

ht_status ht_fit_config_set_flag(ht_fit_config* cfg, const char* name, int value) {
    return guarded([&] {
        require(cfg, "cfg");
        require(name, "name");
        const std::string key = name;
        const bool v = value != 0;
        if (key == "multi_ranker") cfg->cfg.model.multi_ranker = v;
        else if (key == "auxiliary") cfg->cfg.model.auxiliary = v;
        else if (key == "elite") cfg->cfg.model.elite = v;
        else if (key == "standardize") cfg->cfg.standardize = v;
        else if (key == "retain_latent") cfg->cfg.mcmc.retain_latent = v;
        else if (key == "check_rank_consistency") cfg->cfg.mcmc.check_rank_consistency = v;
        else throw ht::Error(ht::ErrorCode::InvalidArgument, "unknown flag '" + key + "'");
    });
}

ht_status ht_fit_config_apply_prior(ht_fit_config* cfg, const char* prior_path) {
    return guarded([&] {
        require(cfg, "cfg");
        require(prior_path, "prior_path");
        const auto prior = ht::prior_from_json(ht::load_json(prior_path));
        cfg->cfg.model = ht::apply_updated_prior(cfg->cfg.model, prior, "updated:" + fs::path(prior_path).filename().string());
    });
}

void ht_fit_config_free(ht_fit_config* cfg) { delete cfg; }

ht_status ht_fit(const ht_dataset* data, const ht_fit_config* cfg, uint64_t seed, ht_posterior** out) {
    return guarded([&] {
        require(data, "data");
        require(cfg, "cfg");
        require(out, "out");
        if (cfg->cfg.model.auxiliary && data->data.survey.empty()) {
            throw ht::Error(ht::ErrorCode::InvalidArgument, "the auxiliary model needs a survey file");
        }
        auto handle = std::make_unique<ht_posterior>();
        ht::Dataset fitted = cfg->cfg.standardize ? data->data.standardized(cfg->cfg.column_kinds) : data->data;
        handle->scaling = cfg->cfg.standardize ? fitted.scaling : identity_scaling(fitted.covariate_names);
        ht::McmcConfig mcmc = cfg->cfg.mcmc;
        mcmc.seed = seed;
        ht::RngStream rng(seed, 0);
        handle->samples = ht::fit(cfg->cfg.model, fitted, mcmc, rng);
        handle->data = std::move(fitted);
        handle->seed = seed;
        *out = handle.release();
    });
}

ht_status ht_posterior_load(const char* samples_path, ht_posterior** out) {
    return guarded([&] {
        require(samples_path, "samples_path");
        require(out, "out");
        auto handle = std::make_unique<ht_posterior>();
        handle->samples = ht::load_samples(samples_path);
        handle->scaling = identity_scaling(handle->samples.covariate_names);
        *out = handle.release();
    });
}

ht_status ht_posterior_dims(const ht_posterior* post, size_t* draws, size_t* covariates, size_t* rankers) {
    return guarded([&] {
        require(post, "post");
        if (draws) *draws = post->samples.draws();
        if (covariates) *covariates = post->samples.covariate_names.size();
        if (rankers) *rankers = post->samples.ranker_ids.size();
    });
}

ht_status ht_posterior_delta_mean(const ht_posterior* post, double* out, size_t len) {
    return guarded([&] {
        require(post, "post");
        require(out, "out");
        const auto m = post->samples.delta_mean();
        if (len != static_cast<size_t>(m.size())) throw ht::Error(ht::ErrorCode::DimensionMismatch, "buffer length");
        std::copy(m.begin(), m.end(), out);
    });
}

ht_status ht_posterior_omega_mean(const ht_posterior* post, double* out, size_t len) {
    return guarded([&] {
        require(post, "post");
        require(out, "out");
        const auto m = post->samples.omega_mean();
        if (len != static_cast<size_t>(m.size())) throw ht::Error(ht::ErrorCode::DimensionMismatch, "buffer length");
        std::copy(m.begin(), m.end(), out);
    });
}

ht_status ht_posterior_write(const ht_posterior* post, const char* out_dir, int write_samples) {
    return guarded([&] {
        require(post, "post");
        require(out_dir, "out_dir");
        const fs::path dir(out_dir);
        fs::create_directories(dir);
        const auto& s = post->samples;
        const std::string method = s.spec.multi_ranker ? "hybrid" : "hybrid_basic";
        ht::csv::write_atomic(dir / "coefficients.csv", ht::coefficients_to_csv(method, s));
        const auto mean = s.delta_mean();
        if (mean.cwiseAbs().maxCoeff() > 0.0) {
            ht::csv::write_atomic(dir / "standardized_coefs.csv", ht::standardized_to_csv(method, s.covariate_names, mean));
        }
        ht::csv::write_atomic(dir / "scaling.csv", ht::scaling_to_csv(post->scaling));
        ht::csv::write_atomic(dir / "fit.log", fit_log(*post));
        if (post->data && s.spec.multi_ranker) {
            std::vector<ht::CorrelationRow> rows;
            std::map<std::string, std::map<std::string, int>> aggregated;
            for (const auto& scheme : post->data->rankings) {
                auto it = aggregated.find(scheme.community_id);
                if (it == aggregated.end()) {
                    it = aggregated.emplace(scheme.community_id, ht::aggregate_model_ranking(s, scheme.community_id)).first;
                }
                if (scheme.size() < 2) continue;
                rows.push_back({scheme.community_id, scheme.ranker_id, ht::rank_correlation(it->second, scheme.ranks)});
            }
            ht::csv::write_atomic(dir / "correlations.csv", ht::correlations_to_csv(rows));
        }
        if (write_samples) ht::csv::write_atomic(dir / "samples.csv", ht::samples_to_csv(s));
    });
}

void ht_posterior_free(ht_posterior* post) { delete post; }

ht_status ht_generate(const char* config_path, const uint64_t* seed, const char* out_dir) {
    return guarded([&] {
        require(out_dir, "out_dir");
        ht::GenConfig cfg;
        if (auto p = opt_path(config_path)) cfg = ht::gen_config_from_json(ht::load_json(*p));
        if (seed) cfg.seed = *seed;
        ht::RngStream rng(cfg.seed, 0);
        const auto gen = ht::generate_dataset(cfg, rng);
        ht::write_generated(gen, out_dir);
    });
}

ht_status ht_score(const char* coefficients_path, const char* census_path, const char* scaling_path,
                   const char* quotas_path, double quota_share, int drop_elite, const char* out_path) {
    return guarded([&] {
        require(coefficients_path, "coefficients_path");
        require(census_path, "census_path");
        require(out_path, "out_path");
        const auto coefs = ht::load_coefficients(coefficients_path);
        const auto census = ht::load_census(census_path);

        std::vector<std::size_t> columns;
        std::set<std::size_t> elite;
        for (std::size_t p = 0; p < coefs.names.size(); ++p) {
            const auto it = std::find(census.covariate_names.begin(), census.covariate_names.end(), coefs.names[p]);
            if (it == census.covariate_names.end()) {
                throw ht::Error(ht::ErrorCode::MissingColumn, "census has no column '" + coefs.names[p] + "'");
            }
            const auto j = static_cast<std::size_t>(it - census.covariate_names.begin());
            columns.push_back(j);
            if (std::find(census.elite_columns.begin(), census.elite_columns.end(), j) != census.elite_columns.end()) {
                elite.insert(p);
            }
        }
        Eigen::MatrixXd x(static_cast<Eigen::Index>(census.households.size()), static_cast<Eigen::Index>(columns.size()));
        for (std::size_t i = 0; i < census.households.size(); ++i) {
            for (std::size_t p = 0; p < columns.size(); ++p) {
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) = census.households[i].x[columns[p]];
            }
        }
        if (auto sp = opt_path(scaling_path)) {
            const auto info = ht::load_scaling(*sp);
            std::map<std::string, double> divisor;
            for (const auto& c : info.columns) divisor[c.name] = c.divisor;
            for (std::size_t p = 0; p < coefs.names.size(); ++p) {
                auto it = divisor.find(coefs.names[p]);
                if (it == divisor.end()) throw ht::Error(ht::ErrorCode::MissingColumn, "scaling has no entry for '" + coefs.names[p] + "'");
                x.col(static_cast<Eigen::Index>(p)) /= it->second;
            }
        }
        const auto scores = ht::compute_scores(x, coefs.mean, drop_elite ? elite : std::set<std::size_t>{});

        std::map<std::string, int> quotas;
        if (auto qp = opt_path(quotas_path)) quotas = ht::load_quotas(*qp);
        std::map<std::string, std::map<std::string, double>> by_community;
        for (std::size_t i = 0; i < census.households.size(); ++i) {
            by_community[census.households[i].community_id][census.households[i].id] = scores[static_cast<Eigen::Index>(i)];
        }
        std::map<std::string, std::set<std::string>> selected;
        for (const auto& [community, s] : by_community) {
            int q;
            if (auto it = quotas.find(community); it != quotas.end()) {
                q = it->second;
            } else {
                if (!(quota_share > 0.0 && quota_share < 1.0)) throw ht::Error(ht::ErrorCode::InvalidArgument, "quota share must lie in (0, 1)");
                q = std::max(1, static_cast<int>(std::lround(quota_share * static_cast<double>(s.size()))));
            }
            selected[community] = ht::select_beneficiaries(s, q);
        }
        const fs::path out(out_path);
        if (out.has_parent_path()) fs::create_directories(out.parent_path());
        ht::csv::write_atomic(out, ht::scores_to_csv(census.households, scores, selected));
    });
}

ht_status ht_evaluate(const char* plan_path, const char* census_path, const char* rankings_path, const char* survey_path,
                      const char* quotas_path, const char* truth_path, const uint64_t* seed, int threads,
                      const char* out_dir) {
    return guarded([&] {
        require(plan_path, "plan_path");
        require(census_path, "census_path");
        require(rankings_path, "rankings_path");
        require(out_dir, "out_dir");
        ht::ExperimentPlan plan = ht::plan_from_json(ht::load_json(plan_path));
        if (seed) plan.seed = *seed;
        if (threads > 0) plan.threads = threads;
        const auto raw = ht::load_dataset(census_path, rankings_path, opt_path(survey_path), opt_path(quotas_path));
        std::optional<ht::TruthRecord> truth;
        if (auto tp = opt_path(truth_path)) truth = ht::load_truth(*tp);
        const auto result = ht::replication_experiment(plan, raw.standardized(), truth);
        const fs::path dir(out_dir);
        fs::create_directories(dir);
        ht::csv::write_atomic(dir / "errors.csv", ht::errors_to_csv(result));
        ht::csv::write_atomic(dir / "summary.csv", ht::summary_to_csv(result));
    });
}

ht_status ht_update_prior(const char* samples_path, double inflation, double shrink, const char* out_path) {
    return guarded([&] {
        require(samples_path, "samples_path");
        require(out_path, "out_path");
        const auto samples = ht::load_samples(samples_path);
        const auto prior = ht::compose_updated_priors(samples, inflation, shrink);
        const fs::path out(out_path);
        if (out.has_parent_path()) fs::create_directories(out.parent_path());
        ht::csv::write_atomic(out, ht::prior_to_json(prior).dump(2) + "\n");
    });
}

ht_status ht_write_manifest(const char* out_dir, const char* command, const char* config_path,
                            const char* const* input_paths, size_t n_inputs, const uint64_t* seed,
                            const char* started_at) {
    return guarded([&] {
        require(out_dir, "out_dir");
        require(command, "command");
        const fs::path dir(out_dir);
        fs::create_directories(dir);
        ht::json inputs = ht::json::array();
        for (size_t i = 0; i < n_inputs; ++i) {
            if (input_paths[i] == nullptr) continue;
            inputs.push_back({{"path", input_paths[i]}, {"sha256", sha256_file(input_paths[i])}});
        }
        ht::json outputs = ht::json::array();
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_regular_file() && entry.path().filename() != "manifest.json") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) outputs.push_back({{"path", f.filename().string()}, {"sha256", sha256_file(f)}});
        ht::json manifest{{"command", command},
                          {"config", config_path ? ht::json(config_path) : ht::json(nullptr)},
                          {"config_sha256", config_path ? ht::json(sha256_file(config_path)) : ht::json(nullptr)},
                          {"inputs", inputs},
                          {"output_dir", dir.string()},
                          {"seed", seed ? ht::json(*seed) : ht::json(nullptr)},
                          {"started_at", started_at ? std::string(started_at) : utc_now()},
                          {"finished_at", utc_now()},
                          {"version", ht_version()},
                          {"outputs", outputs}};
        ht::csv::write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
    });
}

} // extern "C"
