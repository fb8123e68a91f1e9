#include "hybridtarget/experiment.hpp"

#include "hybridtarget/baselines.hpp"
#include "hybridtarget/csv.hpp"
#include "hybridtarget/dynamic_update.hpp"
#include "hybridtarget/error.hpp"
#include "hybridtarget/targeting.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace ht {

namespace {

constexpr std::uint64_t kSampleTag = 0x5A;
constexpr std::uint64_t kMethodTag = 0x100;
constexpr std::uint64_t kPriorTag = 0xD0;

const std::vector<std::pair<Method, std::string>> kMethodNames{
    {Method::Hybrid, "hybrid"},   {Method::HybridAI, "hybrid_ai"},
    {Method::HybridDU, "hybrid_du"}, {Method::HybridEC, "hybrid_ec"},
    {Method::Probit, "probit"},   {Method::Pmt, "pmt"},
    {Method::PmtExpenditure, "pmt_expenditure"}, {Method::Random, "random"},
};

std::set<std::size_t> as_set(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

Eigen::MatrixXd rows_matrix(const std::vector<const Household*>& rows, std::size_t p) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < p; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i]->x[j];
    }
    return x;
}

/// Everything shared by all replications.
struct Context {
    const ExperimentPlan* plan = nullptr;
    Dataset full;      // with elite columns
    Dataset plain;     // elite columns removed
    std::vector<std::string> train_communities;
    std::vector<const Household*> test_full;
    std::vector<const Household*> test_plain;
    std::map<std::string, std::string> community_of;
    std::map<std::string, int> test_quotas;
    std::map<std::string, std::set<std::string>> truly_poor;
    std::map<std::string, int> train_quotas;
    std::vector<Household> aux_survey;
    std::optional<UpdatedPrior> du_prior;
    // expenditure-based truth
    std::vector<const Household*> test_surveyed;
    std::map<std::string, std::set<std::string>> expenditure_poor;
    std::map<std::string, int> expenditure_quotas;
    ModelSpec base_spec;
};

std::map<std::string, double> to_score_map(const std::vector<const Household*>& rows, const Eigen::VectorXd& s) {
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < rows.size(); ++i) out[rows[i]->id] = s[static_cast<Eigen::Index>(i)];
    return out;
}

double run_method(const Context& ctx, Method method, const std::set<std::string>& sampled, RngStream& rng) {
    const auto& plan = *ctx.plan;
    auto evaluate = [&](const std::map<std::string, double>& scores) {
        return evaluate_targeting(method_name(method), scores, ctx.community_of, ctx.test_quotas, ctx.truly_poor).pooled_error;
    };
    switch (method) {
    case Method::Hybrid:
    case Method::HybridAI:
    case Method::HybridDU: {
        Dataset train = ctx.plain.select_communities(sampled);
        ModelSpec spec = ctx.base_spec;
        spec.elite = false;
        if (method == Method::HybridAI) {
            spec.auxiliary = true;
            train.survey = ctx.aux_survey;
        } else if (method == Method::HybridDU) {
            spec = apply_updated_prior(spec, *ctx.du_prior);
        }
        const auto samples = fit(spec, train, plan.mcmc, rng);
        return evaluate(to_score_map(ctx.test_plain, compute_scores(rows_matrix(ctx.test_plain, ctx.plain.covariate_count()),
                                                                    samples.delta_mean())));
    }
    case Method::HybridEC: {
        const Dataset train = ctx.full.select_communities(sampled);
        ModelSpec spec = ctx.base_spec;
        spec.elite = true;
        const auto samples = fit(spec, train, plan.mcmc, rng);
        return evaluate(to_score_map(ctx.test_full, compute_scores(rows_matrix(ctx.test_full, ctx.full.covariate_count()),
                                                                   samples.delta_mean(), as_set(ctx.full.elite_columns))));
    }
    case Method::Probit: {
        const Dataset train = ctx.plain.select_communities(sampled);
        const auto index = train.household_index();
        std::vector<const Household*> rows;
        std::vector<int> outcome;
        for (const auto& scheme : train.rankings) {
            const auto d = dichotomize(scheme, ctx.train_quotas.at(scheme.community_id));
            for (const auto& [id, v] : d) {
                rows.push_back(&train.households[index.at(id)]);
                outcome.push_back(v);
            }
        }
        const auto fit_result = fit_probit_mle(rows_matrix(rows, train.covariate_count()),
                                               Eigen::Map<const Eigen::VectorXi>(outcome.data(), static_cast<Eigen::Index>(outcome.size())));
        const Eigen::VectorXd s = -fit_result.linear_index(rows_matrix(ctx.test_plain, ctx.plain.covariate_count()));
        return evaluate(to_score_map(ctx.test_plain, s));
    }
    case Method::Pmt:
    case Method::PmtExpenditure: {
        std::vector<const Household*> rows;
        for (const auto& h : ctx.plain.survey) {
            if (sampled.contains(h.community_id)) rows.push_back(&h);
        }
        if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "no survey rows in the sampled training communities");
        Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) y[static_cast<Eigen::Index>(i)] = *rows[i]->y;
        const auto pmt = fit_pmt_ols(rows_matrix(rows, ctx.plain.covariate_count()), y);
        if (method == Method::Pmt) {
            return evaluate(to_score_map(ctx.test_plain, pmt.predict(rows_matrix(ctx.test_plain, ctx.plain.covariate_count()))));
        }
        const auto scores = to_score_map(ctx.test_surveyed, pmt.predict(rows_matrix(ctx.test_surveyed, ctx.plain.covariate_count())));
        return evaluate_targeting(method_name(method), scores, ctx.community_of, ctx.expenditure_quotas, ctx.expenditure_poor)
            .pooled_error;
    }
    case Method::Random: {
        std::map<std::string, double> scores;
        for (const auto* h : ctx.test_plain) scores[h->id] = rng.uniform();
        return evaluate(scores);
    }
    }
    throw Error(ErrorCode::Internal, "unhandled method");
}

} // namespace

std::string method_name(Method m) {
    for (const auto& [method, name] : kMethodNames) {
        if (method == m) return name;
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    for (const auto& [method, n] : kMethodNames) {
        if (n == name) return method;
    }
    throw Error(ErrorCode::InvalidConfig, "unknown method '" + name + "'");
}

void ExperimentPlan::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
    if (community_counts.empty()) fail("community_counts is empty");
    for (int n : community_counts) {
        if (n < 1) fail("community counts must be >= 1");
    }
    if (replications < 1) fail("replications must be >= 1");
    if (methods.empty()) fail("no methods");
    if (threads < 1) fail("threads must be >= 1");
    if (!(du_inflation >= 1.0)) fail("du_inflation must be >= 1");
    if (!(du_shrink >= 0.0 && du_shrink <= 1.0)) fail("du_shrink must lie in [0, 1]");
    if (!(quota_share > 0.0 && quota_share < 1.0)) fail("quota_share must lie in (0, 1)");
    if (train_label == test_label || train_label == aux_label || test_label == aux_label) fail("split labels must differ");
    model.validate();
    mcmc.validate();
}

double ExperimentResult::mean_error(Method m, int n) const {
    for (const auto& row : summary) {
        if (row.method == m && row.n_communities == n) return row.mean;
    }
    throw Error(ErrorCode::InvalidArgument, "no summary row for " + method_name(m) + " at n=" + std::to_string(n));
}

std::map<std::string, std::set<std::string>> derive_truly_poor(const Dataset& data, const std::optional<TruthRecord>& truth,
                                                               double quota_share) {
    if (truth) return truth->poor_sets();
    std::map<std::string, std::map<std::string, double>> mean_rank;
    std::map<std::string, std::map<std::string, int>> count;
    for (const auto& scheme : data.rankings) {
        for (const auto& [id, r] : scheme.ranks) {
            mean_rank[scheme.community_id][id] += r;
            ++count[scheme.community_id][id];
        }
    }
    std::map<std::string, std::set<std::string>> out;
    for (auto& [community, ranks] : mean_rank) {
        for (auto& [id, v] : ranks) v /= count[community][id];
        auto q = data.quotas.find(community);
        const int quota = q != data.quotas.end()
                              ? q->second
                              : std::max(1, static_cast<int>(std::lround(quota_share * static_cast<double>(ranks.size()))));
        out[community] = select_beneficiaries(ranks, quota);
    }
    return out;
}

ExperimentResult replication_experiment(const ExperimentPlan& plan, const Dataset& data,
                                        const std::optional<TruthRecord>& truth) {
    plan.validate();
    Context ctx;
    ctx.plan = &plan;
    ctx.full = data;
    ctx.plain = data.drop_columns(as_set(data.elite_columns));
    ctx.base_spec = plan.model;
    ctx.base_spec.multi_ranker = plan.multi_ranker.value_or(data.ranker_ids().size() > 1);

    const auto ranked = data.ranked_community_ids();
    const std::set<std::string> ranked_set(ranked.begin(), ranked.end());
    for (const auto& c : data.communities_in_split(plan.train_label)) {
        if (ranked_set.contains(c)) ctx.train_communities.push_back(c);
    }
    const auto test = data.communities_in_split(plan.test_label);
    const std::set<std::string> test_set(test.begin(), test.end());
    const auto aux = data.communities_in_split(plan.aux_label);
    const std::set<std::string> aux_set(aux.begin(), aux.end());
    if (test_set.empty()) throw Error(ErrorCode::InvalidArgument, "no communities labelled '" + plan.test_label + "'");
    const int max_n = *std::max_element(plan.community_counts.begin(), plan.community_counts.end());
    if (static_cast<std::size_t>(max_n) > ctx.train_communities.size()) {
        throw Error(ErrorCode::NotEnoughCommunities, "plan asks for " + std::to_string(max_n) + " training communities but only " +
                                                         std::to_string(ctx.train_communities.size()) + " are ranked");
    }

    for (std::size_t i = 0; i < data.households.size(); ++i) {
        const auto& h = data.households[i];
        ctx.community_of[h.id] = h.community_id;
        if (test_set.contains(h.community_id)) {
            ctx.test_full.push_back(&ctx.full.households[i]);
            ctx.test_plain.push_back(&ctx.plain.households[i]);
        }
    }

    ctx.truly_poor = derive_truly_poor(data, truth, plan.quota_share);
    std::map<std::string, int> sizes;
    for (const auto& h : data.households) ++sizes[h.community_id];
    for (const auto& c : test) {
        if (plan.quota_rule == QuotaRule::TruthCount) {
            auto it = ctx.truly_poor.find(c);
            ctx.test_quotas[c] = it == ctx.truly_poor.end() ? 0 : static_cast<int>(it->second.size());
        } else {
            ctx.test_quotas[c] = std::max(1, static_cast<int>(std::lround(plan.quota_share * sizes[c])));
        }
    }
    for (const auto& c : ctx.train_communities) {
        auto q = data.quotas.find(c);
        auto t = ctx.truly_poor.find(c);
        if (q != data.quotas.end()) ctx.train_quotas[c] = q->second;
        else if (t != ctx.truly_poor.end()) ctx.train_quotas[c] = static_cast<int>(t->second.size());
        else ctx.train_quotas[c] = std::max(1, static_cast<int>(std::lround(plan.quota_share * sizes[c])));
    }

    const auto uses = [&](Method m) { return std::find(plan.methods.begin(), plan.methods.end(), m) != plan.methods.end(); };
    if (uses(Method::HybridAI)) {
        for (const auto& h : ctx.plain.survey) {
            if (aux_set.contains(h.community_id)) ctx.aux_survey.push_back(h);
        }
        if (ctx.aux_survey.empty()) throw Error(ErrorCode::InvalidArgument, "hybrid_ai needs survey rows in the aux split");
    }
    if (uses(Method::HybridEC) && data.elite_columns.empty()) {
        throw Error(ErrorCode::InvalidArgument, "hybrid_ec needs elite_* columns in the census");
    }
    if (uses(Method::HybridDU)) {
        const Dataset previous = ctx.plain.select_communities(aux_set);
        if (previous.rankings.empty()) throw Error(ErrorCode::InvalidArgument, "hybrid_du needs rankings in the aux split");
        ModelSpec spec = ctx.base_spec;
        spec.auxiliary = false;
        spec.elite = false;
        RngStream rng(derive_seed(plan.seed, 0, kPriorTag), 0);
        const auto samples = fit(spec, previous, plan.mcmc, rng);
        ctx.du_prior = compose_updated_priors(samples, plan.du_inflation, plan.du_shrink);
    }
    if (uses(Method::PmtExpenditure)) {
        std::map<std::string, std::map<std::string, double>> by_community;
        for (const auto& h : ctx.plain.survey) {
            if (!test_set.contains(h.community_id)) continue;
            ctx.test_surveyed.push_back(&h);
            by_community[h.community_id][h.id] = *h.y;
        }
        if (ctx.test_surveyed.empty()) throw Error(ErrorCode::InvalidArgument, "pmt_expenditure needs survey rows in the test split");
        for (const auto& [c, ys] : by_community) {
            const int q = std::max(1, std::min(static_cast<int>(ys.size()), ctx.test_quotas[c]));
            ctx.expenditure_quotas[c] = q;
            ctx.expenditure_poor[c] = select_beneficiaries(ys, q);
        }
    }

    struct Task {
        int n;
        int rep;
    };
    std::vector<Task> tasks;
    for (int n : plan.community_counts) {
        for (int rep = 0; rep < plan.replications; ++rep) tasks.push_back({n, rep});
    }
    const std::size_t m_count = plan.methods.size();
    std::vector<double> results(tasks.size() * m_count, 0.0);
    std::vector<std::exception_ptr> failures(tasks.size());

    auto run_task = [&](std::size_t t) {
        const auto [n, rep] = tasks[t];
        RngStream sample_rng(derive_seed(plan.seed, static_cast<std::uint64_t>(n), kSampleTag), static_cast<std::uint64_t>(rep));
        std::vector<std::string> pool = ctx.train_communities;
        std::set<std::string> sampled;
        for (int k = 0; k < n; ++k) {
            const auto remaining = pool.size() - static_cast<std::size_t>(k);
            const auto j = static_cast<std::size_t>(k) + static_cast<std::size_t>(sample_rng() % remaining);
            std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
            sampled.insert(pool[static_cast<std::size_t>(k)]);
        }
        for (std::size_t m = 0; m < m_count; ++m) {
            const auto tag = kMethodTag + static_cast<std::uint64_t>(plan.methods[m]);
            RngStream rng(derive_seed(plan.seed, static_cast<std::uint64_t>(n), tag), static_cast<std::uint64_t>(rep));
            results[t * m_count + m] = run_method(ctx, plan.methods[m], sampled, rng);
        }
    };

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t = next++; t < tasks.size(); t = next++) {
            try {
                run_task(t);
            } catch (...) {
                failures[t] = std::current_exception();
            }
        }
    };
    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(plan.threads), tasks.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& f : failures) {
        if (f) std::rethrow_exception(f);
    }

    ExperimentResult out;
    for (std::size_t m = 0; m < m_count; ++m) {
        for (int n : plan.community_counts) {
            std::vector<double> errs;
            for (std::size_t t = 0; t < tasks.size(); ++t) {
                if (tasks[t].n != n) continue;
                const double e = results[t * m_count + m];
                out.errors.push_back({plan.methods[m], n, tasks[t].rep, e});
                errs.push_back(e);
            }
            double mean = 0.0;
            for (double e : errs) mean += e;
            mean /= static_cast<double>(errs.size());
            double ss = 0.0;
            for (double e : errs) ss += (e - mean) * (e - mean);
            const double sd = errs.size() > 1 ? std::sqrt(ss / static_cast<double>(errs.size() - 1)) : 0.0;
            out.summary.push_back({plan.methods[m], n, mean, sd});
        }
    }
    return out;
}

std::string errors_to_csv(const ExperimentResult& result) {
    std::ostringstream out;
    out << "method,n_communities,replication,error\n";
    for (const auto& e : result.errors) {
        out << method_name(e.method) << ',' << e.n_communities << ',' << e.replication << ',' << csv::format_double(e.error) << '\n';
    }
    return out.str();
}

std::string summary_to_csv(const ExperimentResult& result) {
    std::ostringstream out;
    out << "method,n_communities,mean,sd\n";
    for (const auto& s : result.summary) {
        out << method_name(s.method) << ',' << s.n_communities << ',' << csv::format_double(s.mean) << ','
            << csv::format_double(s.sd) << '\n';
    }
    return out.str();
}

} // namespace ht
