#include "hybridtarget/hybridtarget.h"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Shared {
    std::optional<std::uint64_t> seed;
    std::string config;
    std::string out;
};

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

int report(ht_status status, const std::string& command) {
    if (status == HT_OK) return 0;
    std::cerr << "hybridtarget " << command << ": " << ht_last_error() << '\n';
    return ht_status_is_usage_error(status) ? 2 : 1;
}

int finish(const std::string& command, const Shared& shared, const std::vector<std::string>& inputs, const std::string& out_dir,
           const std::string& started) {
    std::vector<const char*> paths;
    for (const auto& p : inputs) {
        if (!p.empty()) paths.push_back(p.c_str());
    }
    const std::uint64_t seed = shared.seed.value_or(0);
    return report(ht_write_manifest(out_dir.c_str(), command.c_str(), opt(shared.config), paths.data(), paths.size(),
                                    shared.seed ? &seed : nullptr, started.c_str()),
                  command);
}

void add_shared(CLI::App* cmd, Shared& shared, bool config_required = false) {
    cmd->add_option("--seed", shared.seed, "Seed for every random stream");
    auto* config = cmd->add_option("--config", shared.config, "JSON configuration file")->check(CLI::ExistingFile);
    if (config_required) config->required();
    cmd->add_option("--out", shared.out, "Output directory")->required();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Community-ranking and survey based poverty targeting"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(ht_version()));

    Shared shared;

    auto* generate = app.add_subcommand("generate", "Write a synthetic population with known ground truth");
    add_shared(generate, shared);

    struct {
        std::string census, rankings, survey, quotas, prior;
        std::optional<int> iterations, burn_in;
        bool basic = false, auxiliary = false, no_standardize = false, samples = false;
    } fit_args;
    auto* fit = app.add_subcommand("fit", "Fit the ranking model by Gibbs sampling");
    add_shared(fit, shared);
    fit->add_option("--census", fit_args.census, "Census CSV")->required()->check(CLI::ExistingFile);
    fit->add_option("--rankings", fit_args.rankings, "Rankings CSV")->required()->check(CLI::ExistingFile);
    fit->add_option("--survey", fit_args.survey, "Survey CSV with expenditure")->check(CLI::ExistingFile);
    fit->add_option("--quotas", fit_args.quotas, "Quotas CSV")->check(CLI::ExistingFile);
    fit->add_option("--prior", fit_args.prior, "Prior file written by 'update'")->check(CLI::ExistingFile);
    fit->add_option("--iterations", fit_args.iterations, "Total Gibbs iterations");
    fit->add_option("--burn-in", fit_args.burn_in, "Discarded iterations");
    fit->add_flag("--basic", fit_args.basic, "Single-ranker model (no household effects or ranker precisions)");
    fit->add_flag("--auxiliary", fit_args.auxiliary, "Use the survey as auxiliary information");
    fit->add_flag("--no-standardize", fit_args.no_standardize, "Fit on raw covariates");
    fit->add_flag("--samples", fit_args.samples, "Also write samples.csv");

    struct {
        std::string coefficients, census, scaling, quotas;
        double quota_share = 0.3;
        bool drop_elite = false;
    } score_args;
    auto* score = app.add_subcommand("score", "Score census households and select beneficiaries");
    add_shared(score, shared);
    score->add_option("--coefficients", score_args.coefficients, "coefficients.csv from 'fit'")->required()->check(CLI::ExistingFile);
    score->add_option("--census", score_args.census, "Census CSV")->required()->check(CLI::ExistingFile);
    score->add_option("--scaling", score_args.scaling, "scaling.csv (default: next to the coefficients)")->check(CLI::ExistingFile);
    score->add_option("--quotas", score_args.quotas, "Quotas CSV")->check(CLI::ExistingFile);
    score->add_option("--quota-share", score_args.quota_share, "Share selected where no quota is given")->check(CLI::Range(0.0, 1.0));
    score->add_flag("--drop-elite", score_args.drop_elite, "Score with elite-connection coefficients set to 0");

    struct {
        std::string census, rankings, survey, quotas, truth;
        int threads = 0;
    } eval_args;
    auto* evaluate = app.add_subcommand("evaluate", "Replication experiment over training-community sample sizes");
    add_shared(evaluate, shared, true);
    evaluate->add_option("--census", eval_args.census, "Census CSV with a split column")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--rankings", eval_args.rankings, "Rankings CSV")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--survey", eval_args.survey, "Survey CSV")->check(CLI::ExistingFile);
    evaluate->add_option("--quotas", eval_args.quotas, "Quotas CSV")->check(CLI::ExistingFile);
    evaluate->add_option("--truth", eval_args.truth, "truth.csv with poverty status")->check(CLI::ExistingFile);
    evaluate->add_option("--threads", eval_args.threads, "Worker threads (default: plan setting)");

    struct {
        std::string samples;
        double inflation = 1.5;
        double shrink = 0.1;
    } update_args;
    auto* update = app.add_subcommand("update", "Build next-period priors from retained draws");
    add_shared(update, shared);
    update->add_option("--samples,--from", update_args.samples, "samples.csv from 'fit --samples'")->required()->check(CLI::ExistingFile);
    update->add_option("--inflation", update_args.inflation, "Variance inflation factor (>= 1)");
    update->add_option("--shrink", update_args.shrink, "Weight of the uniform distribution in the ranker prior");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const std::string started = utc_now();
    const std::uint64_t seed = shared.seed.value_or(1);

    if (generate->parsed()) {
        const auto status = ht_generate(opt(shared.config), shared.seed ? &seed : nullptr, shared.out.c_str());
        if (status != HT_OK) return report(status, "generate");
        return finish("generate", shared, {}, shared.out, started);
    }

    if (fit->parsed()) {
        if (fit_args.auxiliary && fit_args.survey.empty()) {
            std::cerr << "hybridtarget fit: --auxiliary requires --survey\n";
            return 2;
        }
        ht_fit_config* cfg = nullptr;
        auto status = ht_fit_config_load(opt(shared.config), &cfg);
        if (status != HT_OK) return report(status, "fit");
        if (fit_args.basic) ht_fit_config_set_flag(cfg, "multi_ranker", 0);
        if (fit_args.auxiliary) ht_fit_config_set_flag(cfg, "auxiliary", 1);
        if (fit_args.no_standardize) ht_fit_config_set_flag(cfg, "standardize", 0);
        if (fit_args.iterations || fit_args.burn_in) {
            const int total = fit_args.iterations.value_or(4000);
            const int burn = fit_args.burn_in.value_or(total / 2);
            status = ht_fit_config_set_iterations(cfg, total, burn);
        }
        if (status == HT_OK && !fit_args.prior.empty()) status = ht_fit_config_apply_prior(cfg, fit_args.prior.c_str());
        ht_dataset* data = nullptr;
        if (status == HT_OK) {
            status = ht_dataset_load(fit_args.census.c_str(), fit_args.rankings.c_str(), opt(fit_args.survey),
                                     opt(fit_args.quotas), &data);
        }
        ht_posterior* post = nullptr;
        if (status == HT_OK) status = ht_fit(data, cfg, seed, &post);
        if (status == HT_OK) status = ht_posterior_write(post, shared.out.c_str(), fit_args.samples ? 1 : 0);
        ht_posterior_free(post);
        ht_dataset_free(data);
        ht_fit_config_free(cfg);
        if (status != HT_OK) return report(status, "fit");
        return finish("fit", shared, {fit_args.census, fit_args.rankings, fit_args.survey, fit_args.quotas, fit_args.prior},
                      shared.out, started);
    }

    if (score->parsed()) {
        std::string scaling = score_args.scaling;
        if (scaling.empty()) {
            const auto sibling = fs::path(score_args.coefficients).parent_path() / "scaling.csv";
            if (fs::exists(sibling)) scaling = sibling.string();
        }
        const auto out_file = (fs::path(shared.out) / "scores.csv").string();
        const auto status = ht_score(score_args.coefficients.c_str(), score_args.census.c_str(), opt(scaling),
                                     opt(score_args.quotas), score_args.quota_share, score_args.drop_elite ? 1 : 0,
                                     out_file.c_str());
        if (status != HT_OK) return report(status, "score");
        return finish("score", shared, {score_args.coefficients, score_args.census, scaling, score_args.quotas}, shared.out,
                      started);
    }

    if (evaluate->parsed()) {
        const auto status = ht_evaluate(shared.config.c_str(), eval_args.census.c_str(), eval_args.rankings.c_str(),
                                        opt(eval_args.survey), opt(eval_args.quotas), opt(eval_args.truth),
                                        shared.seed ? &seed : nullptr, eval_args.threads, shared.out.c_str());
        if (status != HT_OK) return report(status, "evaluate");
        return finish("evaluate", shared,
                      {eval_args.census, eval_args.rankings, eval_args.survey, eval_args.quotas, eval_args.truth}, shared.out,
                      started);
    }

    if (update->parsed()) {
        const auto out_file = (fs::path(shared.out) / "prior.json").string();
        const auto status = ht_update_prior(update_args.samples.c_str(), update_args.inflation, update_args.shrink, out_file.c_str());
        if (status != HT_OK) return report(status, "update");
        return finish("update", shared, {update_args.samples}, shared.out, started);
    }
    return 2;
}
