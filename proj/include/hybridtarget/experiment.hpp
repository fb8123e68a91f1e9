#pragma once

#include "hybridtarget/data.hpp"
#include "hybridtarget/gibbs.hpp"
#include "hybridtarget/synthetic.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ht {

enum class Method { Hybrid, HybridAI, HybridDU, HybridEC, Probit, Pmt, PmtExpenditure, Random };

std::string method_name(Method m);
Method parse_method(const std::string& name);

enum class QuotaRule {
    TruthCount, // q_k = number of truly poor households in community k
    Share,      // q_k = round(quota_share * n_k), at least 1
};

struct ExperimentPlan {
    std::vector<int> community_counts{5, 15, 30};
    int replications = 30;
    std::uint64_t seed = 1;
    std::vector<Method> methods{Method::Hybrid, Method::Probit, Method::Pmt, Method::Random};
    ModelSpec model;
    /// Unset: use the multi-ranker model whenever the data has more than one ranker.
    std::optional<bool> multi_ranker;
    McmcConfig mcmc{1500, 500};
    double du_inflation = 1.5;
    double du_shrink = 0.1;
    QuotaRule quota_rule = QuotaRule::TruthCount;
    double quota_share = 0.3;
    int threads = 1;
    std::string train_label = "train";
    std::string test_label = "test";
    std::string aux_label = "aux";

    void validate() const;
};

struct ErrorRecord {
    Method method;
    int n_communities;
    int replication;
    double error;
};

struct SummaryRow {
    Method method;
    int n_communities;
    double mean;
    double sd;
};

struct ExperimentResult {
    std::vector<ErrorRecord> errors;
    std::vector<SummaryRow> summary;

    double mean_error(Method m, int n) const;
};

/// Truly poor households per community: from the truth record when given,
/// otherwise the q_k households with the lowest mean rank across rankers.
std::map<std::string, std::set<std::string>> derive_truly_poor(const Dataset& data, const std::optional<TruthRecord>& truth,
                                                               double quota_share);

/// For every (method, n) run R replications: sample n training communities
/// without replacement, fit, score the test split and record the pooled error.
/// `data` should already be standardized.
ExperimentResult replication_experiment(const ExperimentPlan& plan, const Dataset& data,
                                        const std::optional<TruthRecord>& truth = std::nullopt);

std::string errors_to_csv(const ExperimentResult& result);
std::string summary_to_csv(const ExperimentResult& result);

} // namespace ht
