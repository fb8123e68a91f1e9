#include "hybridtarget/config.hpp"
#include "hybridtarget/experiment.hpp"
#include "hybridtarget/gibbs.hpp"
#include "hybridtarget/synthetic.hpp"
#include "hybridtarget/targeting.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

int failures = 0;

void report(int id, bool pass, const std::string& name, const std::string& detail) {
    std::printf("[%s] criterion %2d %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

void skip(int id, const std::string& name, const std::string& detail) {
    std::printf("[SKIP] criterion %2d %s: %s\n", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
}

template <typename... T>
std::string fmt(const char* f, T... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

ht::Generated generate(const ht::GenConfig& cfg) {
    ht::RngStream rng(cfg.seed, 0);
    return ht::generate_dataset(cfg, rng);
}

ht::ExperimentPlan plan_for(std::vector<int> counts, std::vector<ht::Method> methods, std::uint64_t seed) {
    ht::ExperimentPlan plan;
    plan.community_counts = std::move(counts);
    plan.replications = 30;
    plan.methods = std::move(methods);
    plan.seed = seed;
    plan.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return plan;
}

// Tolerances.
constexpr double kOracleTol = 1e-10;
constexpr double kOracleSeconds = 10.0;
constexpr double kKsAlpha = 0.001;
constexpr std::size_t kKsDraws = 100000;
constexpr double kConjugacyTol = 0.05;
constexpr long kSweeps = 1000000;
constexpr int kRecoveryRuns = 20;
constexpr int kRecoveryCover = 18;
constexpr double kRecoverySeconds = 300.0;
constexpr double kSignThreshold = 0.5;
constexpr double kShuffledMax = 0.75;
constexpr double kInformativeMin = 1.0;
constexpr int kShuffleSeeds = 18;
constexpr double kCorrelationShare = 0.80;
constexpr double kRandomMargin = 0.10;
constexpr double kAiGain = 0.03;
constexpr double kDuGain = 0.05;
constexpr double kConvergenceGap = 0.01;
constexpr double kMrsTol = 1e-12;

void oracle_suite() {
    const auto start = Clock::now();
    const auto rep = testing::run_oracle_suite(200, 20260101);
    const double t = seconds_since(start);
    report(1, rep.worst() <= kOracleTol && t < kOracleSeconds, "conditional-posterior oracles",
           fmt("200 instances, worst relative error %.2e (<= %.0e), %.2f s (< %.0f s)", rep.worst(), kOracleTol, t,
               kOracleSeconds));
}

void sampler_correctness() {
    const auto cases = testing::tn_cases();
    const double crit = testing::ks_critical(kKsAlpha, kKsDraws);
    int passed = 0;
    double worst = 0;
    for (std::size_t c = 0; c < cases.size(); ++c) {
        const auto tc = cases[c];
        ht::RngStream rng(5000 + c, 0);
        std::vector<double> draws(kKsDraws);
        for (auto& d : draws) d = ht::sample_truncated_normal(tc.mean, tc.var, tc.lo, tc.hi, rng);
        const double d = testing::ks_statistic(
            draws, [&](double x) { return testing::truncated_normal_cdf(x, tc.mean, tc.var, tc.lo, tc.hi); });
        worst = std::max(worst, d);
        passed += d < crit ? 1 : 0;
    }

    // Known-variance normal sample: the sigma_psi^2 conditional given the true
    // regression coefficients should centre on the true variance.
    const double truth = 2.25;
    const int n = 10000;
    ht::RngStream rng(77, 0);
    ht::SurveyDesign survey;
    survey.x.resize(n, 2);
    survey.y.resize(n);
    ht::LatentState state;
    state.gamma = Eigen::Vector2d(0.7, -0.4);
    for (int i = 0; i < n; ++i) {
        survey.x(i, 0) = rng.normal();
        survey.x(i, 1) = 1.0;
        survey.y[i] = 0.7 * survey.x(i, 0) - 0.4 + std::sqrt(truth) * rng.normal();
    }
    const auto params = ht::sigma_psi_params(state, survey);
    double mean = 0;
    const int draws = 20000;
    for (int k = 0; k < draws; ++k) mean += ht::sample_scaled_inv_chisq(params.df, params.scale_sum, rng);
    mean /= draws;
    const double rel = std::abs(mean - truth) / truth;
    report(2, passed == static_cast<int>(cases.size()) && rel <= kConjugacyTol, "sampler correctness",
           fmt("KS %d/%zu cases below %.5f (worst D %.5f); sigma_psi^2 posterior mean %.4f vs %.2f, rel %.4f (<= %.2f)",
               passed, cases.size(), crit, worst, mean, truth, rel, kConjugacyTol));
}

void rank_consistency() {
    const auto start = Clock::now();
    ht::RngStream rng(31337, 0);
    long sweeps = 0, violations = 0;
    int datasets = 0;
    while (sweeps < kSweeps) {
        const int rankers = 1 + static_cast<int>(rng() % 3);
        const auto data = testing::random_dataset(rng, 2 + static_cast<int>(rng() % 4), 1, 12, 2, rankers);
        const auto design = ht::RankedDesign::build(data);
        ht::ModelSpec spec;
        spec.multi_ranker = rankers > 1 || rng.uniform() < 0.5;
        const ht::GibbsKernel kernel(spec, design, nullptr);
        auto state = kernel.initial_state();
        ++datasets;
        for (int i = 0; i < 2000 && sweeps < kSweeps; ++i, ++sweeps) {
            kernel.step(state, rng);
            if (!ht::rank_consistent(state, design)) ++violations;
        }
    }
    report(3, violations == 0, "rank consistency",
           fmt("%ld sweeps over %d random datasets, %ld violations, %.1f s", sweeps, datasets, violations, seconds_since(start)));
}

void parameter_recovery() {
    const auto start = Clock::now();
    std::vector<int> covered;
    std::vector<int> sign_ok;
    std::vector<int> sign_needed;
    std::vector<double> truth;
    for (int run = 0; run < kRecoveryRuns; ++run) {
        ht::GenConfig gen;
        gen.seed = 100 + static_cast<std::uint64_t>(run);
        const auto g = generate(gen);
        truth = g.truth.delta;
        covered.resize(truth.size());
        sign_ok.resize(truth.size());
        sign_needed.resize(truth.size());
        ht::ModelSpec spec;
        ht::McmcConfig cfg{10000, 5000};
        ht::RngStream rng(ht::derive_seed(gen.seed, 1), 0);
        const auto summary = ht::fit(spec, g.data, cfg, rng).summarize();
        for (std::size_t p = 0; p < truth.size(); ++p) {
            if (summary[p].q025 <= truth[p] && truth[p] <= summary[p].q975) ++covered[p];
            if (std::abs(truth[p]) >= kSignThreshold) {
                ++sign_needed[p];
                if ((summary[p].mean > 0) == (truth[p] > 0)) ++sign_ok[p];
            }
        }
    }
    const double t = seconds_since(start);
    bool pass = t < kRecoverySeconds;
    std::ostringstream detail;
    detail << "coverage per covariate";
    for (std::size_t p = 0; p < truth.size(); ++p) {
        pass = pass && covered[p] >= kRecoveryCover && sign_ok[p] == sign_needed[p];
        detail << " " << covered[p] << "/" << kRecoveryRuns;
    }
    detail << " (>= " << kRecoveryCover << "); sign matches";
    for (std::size_t p = 0; p < truth.size(); ++p) detail << " " << sign_ok[p] << "/" << sign_needed[p];
    detail << fmt("; %.1f s (< %.0f s)", t, kRecoverySeconds);
    report(4, pass, "parameter recovery", detail.str());
}

void ranker_quality() {
    int good_seeds = 0, favoured = 0, communities = 0;
    for (int s = 0; s < 20; ++s) {
        ht::GenConfig gen;
        gen.shuffled_rankers = {2};
        gen.seed = 200 + static_cast<std::uint64_t>(s);
        const auto g = generate(gen);
        ht::ModelSpec spec;
        ht::McmcConfig cfg{4000, 2000};
        ht::RngStream rng(ht::derive_seed(gen.seed, 2), 0);
        const auto samples = ht::fit(spec, g.data, cfg, rng);
        const auto omega = samples.omega_mean();
        if (omega[2] < kShuffledMax && omega[0] > kInformativeMin && omega[1] > kInformativeMin) ++good_seeds;

        std::map<std::string, std::map<std::string, const ht::RankingScheme*>> by_community;
        for (const auto& scheme : g.data.rankings) by_community[scheme.community_id][scheme.ranker_id] = &scheme;
        for (const auto& [community, schemes] : by_community) {
            const auto model = ht::aggregate_model_ranking(samples, community);
            const double informative =
                0.5 * (ht::rank_correlation(schemes.at("r1")->ranks, model) + ht::rank_correlation(schemes.at("r2")->ranks, model));
            const double shuffled = ht::rank_correlation(schemes.at("r3")->ranks, model);
            favoured += informative > shuffled ? 1 : 0;
            ++communities;
        }
    }
    const double share = static_cast<double>(favoured) / communities;
    report(5, good_seeds >= kShuffleSeeds && share >= kCorrelationShare, "ranker-quality detection",
           fmt("omega separation in %d/20 seeds (>= %d); informative rankers closer to the model ranking in %d/%d communities "
               "(%.3f >= %.2f)",
               good_seeds, kShuffleSeeds, favoured, communities, share, kCorrelationShare));
}

void method_ordering() {
    auto gen = ht::gen_config_from_json(ht::json::parse(
        R"({"n_train":60,"n_test":40,"n_rankers":1,"omega_true":[1],"alpha_sd":0,"gamma_true":[0.3,-0.2,1.0,-0.9,0.9]})"));
    gen.seed = 12;
    const auto g = generate(gen);
    using M = ht::Method;
    const auto plan = plan_for({5, 15, 30}, {M::Hybrid, M::Probit, M::Pmt, M::Random}, 12);
    const auto res = ht::replication_experiment(plan, g.data.standardized(), g.truth);
    const double baseline = 1.0 - gen.quota_share;
    bool pass = true;
    std::ostringstream detail;
    for (int n : plan.community_counts) {
        const double h = res.mean_error(M::Hybrid, n), pr = res.mean_error(M::Probit, n), pm = res.mean_error(M::Pmt, n);
        pass = pass && h < pr && h < pm;
        detail << fmt("n=%d hybrid %.3f probit %.3f pmt %.3f random %.3f; ", n, h, pr, pm, res.mean_error(M::Random, n));
    }
    for (auto m : {M::Hybrid, M::Probit, M::Pmt}) pass = pass && res.mean_error(m, 30) <= baseline - kRandomMargin;
    detail << fmt("non-random methods at n=30 must be <= %.2f", baseline - kRandomMargin);
    report(6, pass, "method ordering", detail.str());
}

void elite_correction() {
    int wins = 0;
    double corrected_sum = 0, uncorrected_sum = 0;
    for (int s = 0; s < 20; ++s) {
        ht::GenConfig gen;
        gen.n_train = 30;
        gen.n_test = 100;
        gen.n_rankers = 1;
        gen.omega_true = {1.0};
        gen.alpha_sd = 0.0;
        gen.elite = true;
        gen.elite_effect = -1.0;
        gen.elite_prevalence = 0.2;
        gen.seed = 300 + static_cast<std::uint64_t>(s);
        const auto g = generate(gen);
        const auto data = g.data.standardized();
        std::set<std::string> train;
        for (const auto& c : data.communities_in_split("train")) train.insert(c);
        ht::ModelSpec spec;
        spec.multi_ranker = false;
        spec.elite = true;
        ht::McmcConfig cfg{2000, 1000};
        ht::RngStream rng(ht::derive_seed(gen.seed, 3), 0);
        const auto samples = ht::fit(spec, data.select_communities(train), cfg, rng);

        std::vector<const ht::Household*> rows;
        std::map<std::string, std::string> community_of;
        for (const auto& h : data.households) {
            if (data.splits.at(h.community_id) != "test") continue;
            rows.push_back(&h);
            community_of[h.id] = h.community_id;
        }
        Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(data.covariate_count()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = 0; j < data.covariate_count(); ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i]->x[j];
        }
        const std::set<std::size_t> elite(data.elite_columns.begin(), data.elite_columns.end());
        const auto poor = g.truth.poor_sets();
        std::map<std::string, int> quotas;
        for (const auto& [id, c] : community_of) quotas[c] = static_cast<int>(poor.count(c) ? poor.at(c).size() : 0);
        auto error_of = [&](const Eigen::VectorXd& scores) {
            std::map<std::string, double> m;
            for (std::size_t i = 0; i < rows.size(); ++i) m[rows[i]->id] = scores[static_cast<Eigen::Index>(i)];
            return ht::evaluate_targeting("hybrid", m, community_of, quotas, poor).pooled_error;
        };
        const double corrected = error_of(ht::compute_scores(x, samples.delta_mean(), elite));
        const double uncorrected = error_of(ht::compute_scores(x, samples.delta_mean()));
        corrected_sum += corrected;
        uncorrected_sum += uncorrected;
        wins += corrected < uncorrected ? 1 : 0;
    }
    report(7, wins == 20, "elite correction",
           fmt("corrected error below uncorrected in %d/20 seeds (needs 20); mean corrected %.3f, uncorrected %.3f", wins,
               corrected_sum / 20, uncorrected_sum / 20));
}

void gain_check(int id, const std::string& name, const char* design, ht::Method method, int large_n, double gain) {
    auto gen = ht::gen_config_from_json(ht::json::parse(design));
    gen.seed = 40 + static_cast<std::uint64_t>(id);
    const auto g = generate(gen);
    const auto plan = plan_for({5, large_n}, {ht::Method::Hybrid, method}, gen.seed);
    const auto res = ht::replication_experiment(plan, g.data.standardized(), g.truth);
    const double h5 = res.mean_error(ht::Method::Hybrid, 5), m5 = res.mean_error(method, 5);
    const double hl = res.mean_error(ht::Method::Hybrid, large_n), ml = res.mean_error(method, large_n);
    const bool pass = m5 <= h5 - gain && std::abs(hl - ml) < kConvergenceGap;
    report(id, pass, name,
           fmt("n=5 hybrid %.3f %s %.3f (needs <= %.3f); n=%d hybrid %.3f %s %.3f, gap %.3f (< %.2f)", h5,
               ht::method_name(method).c_str(), m5, h5 - gain, large_n, hl, ht::method_name(method).c_str(), ml,
               std::abs(hl - ml), kConvergenceGap));
}

void mrs_identity() {
    ht::RngStream rng(99, 0);
    double worst = 0;
    for (int c = 0; c < 1000; ++c) {
        Eigen::VectorXd v(1 + static_cast<Eigen::Index>(rng() % 12));
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 5.0 * rng.normal();
        worst = std::max(worst, std::abs(ht::standardized_coefficients(v).cwiseAbs().mean() - 1.0));
    }
    const Eigen::VectorXd hand = ht::standardized_coefficients(Eigen::Vector3d(2, -1, 1));
    const double hand_err = (hand - Eigen::Vector3d(1.5, -0.75, 0.75)).cwiseAbs().maxCoeff();
    report(10, worst <= kMrsTol && hand_err <= kMrsTol, "MRS identity",
           fmt("worst |mean|out| - 1| %.2e over 1000 vectors; [2,-1,1] -> [%.4f, %.4f, %.4f]", worst, hand[0], hand[1], hand[2]));
}

} // namespace

int main() {
    const auto start = Clock::now();
    oracle_suite();
    sampler_correctness();
    rank_consistency();
    parameter_recovery();
    ranker_quality();
    method_ordering();
    elite_correction();
    gain_check(8, "auxiliary-information gain",
               R"({"n_train":80,"n_test":40,"n_aux":60,"n_binary":4,"n_continuous":6,"n_rankers":1,"omega_true":[1],"alpha_sd":0})",
               ht::Method::HybridAI, 60, kAiGain);
    gain_check(9, "dynamic-updating gain",
               R"({"n_train":120,"n_test":40,"n_aux":20,"n_binary":4,"n_continuous":6,"n_rankers":1,"omega_true":[1],"alpha_sd":0})",
               ht::Method::HybridDU, 100, kDuGain);
    mrs_identity();
    const char* data_dir = std::getenv("HT_INDONESIA_DIR");
    const std::string why = data_dir ? "dataset runs are done through the CLI evaluate command" : "no dataset supplied";
    skip(11, "Indonesian error levels", why);
    skip(12, "Indonesian elite coefficient", why);
    std::printf("%s: %d failing criteria, %.1f s\n", failures ? "FAILED" : "ALL PRIMARY CRITERIA PASS", failures,
                seconds_since(start));
    return failures ? 1 : 0;
}
