#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ht {

enum class ColumnKind { Binary, Continuous };

struct ColumnScaling {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
    double divisor = 1.0; // 2 * sample sd for continuous, 1 for binary
};

/// Per-column divisors recorded at fit time so the same scaling can be
/// re-applied to census or survey rows later.
struct ScalingInfo {
    std::vector<ColumnScaling> columns;

    bool empty() const { return columns.empty(); }
    Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const;
    std::vector<double> apply(std::span<const double> row) const;
};

struct Household {
    std::string id;
    std::string community_id;
    std::vector<double> x;
    std::optional<double> y; // log expenditure per capita; survey rows only
};

/// One ranker's ordering of one community. Rank 1 is the most needy.
struct RankingScheme {
    std::string community_id;
    std::string ranker_id;
    std::map<std::string, int> ranks;

    std::size_t size() const { return ranks.size(); }
    /// Household ids sorted by ascending rank.
    std::vector<std::string> ordered() const;
};

struct Census {
    std::vector<std::string> covariate_names;
    std::vector<std::size_t> elite_columns;
    std::vector<Household> households;
    std::map<std::string, std::string> splits; // community -> split label, if a split column exists
};

struct Dataset {
    std::vector<std::string> covariate_names;
    std::vector<std::size_t> elite_columns;
    std::vector<Household> households;
    std::vector<RankingScheme> rankings;
    std::vector<Household> survey;
    std::map<std::string, int> quotas;
    std::map<std::string, std::string> splits;
    ScalingInfo scaling;

    std::size_t covariate_count() const { return covariate_names.size(); }
    std::unordered_map<std::string, std::size_t> household_index() const;
    std::vector<std::string> community_ids() const;
    std::vector<std::string> ranked_community_ids() const;
    std::vector<std::string> ranker_ids() const;
    std::vector<std::string> communities_in_split(const std::string& label) const;

    /// Households, rankings and survey rows restricted to the given communities.
    Dataset select_communities(const std::set<std::string>& communities) const;
    /// Same data with the given covariate columns removed.
    Dataset drop_columns(const std::set<std::size_t>& columns) const;
    /// Standardize covariates on the census rows and apply the same scaling
    /// to the survey rows.
    Dataset standardized(const std::map<std::string, ColumnKind>& overrides = {}) const;

    Eigen::MatrixXd covariate_matrix() const;
    void validate() const;
};

Census load_census(const std::filesystem::path& path);
std::vector<RankingScheme> load_rankings(const std::filesystem::path& path,
                                         const std::vector<Household>& census);
std::vector<Household> load_survey(const std::filesystem::path& path,
                                   const std::vector<std::string>& covariate_names);
std::map<std::string, int> load_quotas(const std::filesystem::path& path);

Dataset load_dataset(const std::filesystem::path& census, const std::filesystem::path& rankings,
                     const std::optional<std::filesystem::path>& survey,
                     const std::optional<std::filesystem::path>& quotas);

std::string census_to_csv(const Dataset& data);
std::string rankings_to_csv(const std::vector<RankingScheme>& rankings);
std::string survey_to_csv(const Dataset& data);
std::string quotas_to_csv(const std::map<std::string, int>& quotas);
std::vector<RankingScheme> parse_rankings(const std::string& text, const std::vector<Household>& census);

struct Standardized {
    Eigen::MatrixXd scaled;
    ScalingInfo info;
};

/// Continuous columns are divided by twice their sample standard deviation;
/// columns whose values are all 0/1 are left unchanged.
Standardized standardize_covariates(const Eigen::MatrixXd& raw, const std::vector<std::string>& names = {},
                                    const std::map<std::string, ColumnKind>& overrides = {});

/// Ranks in 1..n, smallest value first. Exact ties are broken by index and
/// reported through `tied`.
std::vector<int> rank_of(std::span<const double> values, bool* tied = nullptr);

} // namespace ht
