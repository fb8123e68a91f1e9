#pragma once

#include "hybridtarget/gibbs.hpp"

#include <Eigen/Dense>

#include <map>
#include <set>
#include <string>
#include <vector>

namespace ht {

/// x * delta with the entries at `elite_columns` treated as 0.
Eigen::VectorXd compute_scores(const Eigen::MatrixXd& x, const Eigen::VectorXd& delta,
                               const std::set<std::size_t>& elite_columns = {});

/// The `quota` lowest-scoring households; equal scores go to the smaller id.
std::set<std::string> select_beneficiaries(const std::map<std::string, double>& scores, int quota);

struct ErrorRate {
    double rate = 0.0;
    bool quota_mismatch = false; // |selected| != |truly_poor|
};

ErrorRate error_rate(const std::set<std::string>& selected, const std::set<std::string>& truly_poor);

/// Per-community selection and error plus the pooled error across communities.
struct TargetingResult {
    std::string method;
    std::map<std::string, double> scores;
    std::map<std::string, std::set<std::string>> selected;
    std::map<std::string, double> community_error;
    double pooled_error = 0.0;
    bool quota_mismatch = false;
};

/// Select within each community using its quota and compare with the truth.
/// `community_of` maps every scored household to its community.
TargetingResult evaluate_targeting(const std::string& method, const std::map<std::string, double>& scores,
                                   const std::map<std::string, std::string>& community_of,
                                   const std::map<std::string, int>& quotas,
                                   const std::map<std::string, std::set<std::string>>& truly_poor);

/// coef / mean(|coef|).
Eigen::VectorXd standardized_coefficients(const Eigen::VectorXd& coefs);

/// Spearman correlation between two rankings of the same households.
double rank_correlation(const std::map<std::string, int>& a, const std::map<std::string, int>& b);

/// Ranks of the in-sample posterior-mean scores alpha_i + x_i delta within one
/// fitted community.
std::map<std::string, int> aggregate_model_ranking(const PosteriorSamples& samples, const std::string& community);

} // namespace ht
