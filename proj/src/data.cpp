#include "hybridtarget/data.hpp"

#include "hybridtarget/csv.hpp"
#include "hybridtarget/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ht {

namespace {

constexpr std::string_view kHouseholdId = "household_id";
constexpr std::string_view kCommunityId = "community_id";
constexpr std::string_view kSplit = "split";

bool is_binary(const Eigen::Ref<const Eigen::VectorXd>& column) {
    return std::all_of(column.begin(), column.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

double sample_sd(const Eigen::Ref<const Eigen::VectorXd>& column) {
    const double mean = column.mean();
    const double ss = (column.array() - mean).square().sum();
    return std::sqrt(ss / static_cast<double>(column.size() - 1));
}

std::optional<int> parse_int(const std::string& text) {
    const auto value = csv::parse_double(text);
    if (!value || std::floor(*value) != *value || std::abs(*value) > 1e9) return std::nullopt;
    return static_cast<int>(*value);
}

} // namespace

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::Ok: return "Ok";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonNumericCovariate: return "NonNumericCovariate";
    case ErrorCode::DuplicateHouseholdId: return "DuplicateHouseholdId";
    case ErrorCode::NotAPermutation: return "NotAPermutation";
    case ErrorCode::UnknownHousehold: return "UnknownHousehold";
    case ErrorCode::CommunityMismatch: return "CommunityMismatch";
    case ErrorCode::ZeroVarianceColumn: return "ZeroVarianceColumn";
    case ErrorCode::EmptyInterval: return "EmptyInterval";
    case ErrorCode::InvalidParam: return "InvalidParam";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::InvalidProbabilities: return "InvalidProbabilities";
    case ErrorCode::DivergentChain: return "DivergentChain";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::InvalidQuota: return "InvalidQuota";
    case ErrorCode::AllSameOutcome: return "AllSameOutcome";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::QuotaMismatch: return "QuotaMismatch";
    case ErrorCode::NotEnoughCommunities: return "NotEnoughCommunities";
    case ErrorCode::AllZero: return "AllZero";
    case ErrorCode::SetMismatch: return "SetMismatch";
    case ErrorCode::UnknownCommunity: return "UnknownCommunity";
    case ErrorCode::Internal: return "Internal";
    }
    return "Unknown";
}

Eigen::MatrixXd ScalingInfo::apply(const Eigen::MatrixXd& raw) const {
    if (static_cast<std::size_t>(raw.cols()) != columns.size()) {
        throw Error(ErrorCode::DimensionMismatch, "scaling has " + std::to_string(columns.size()) +
                                                      " columns, matrix has " + std::to_string(raw.cols()));
    }
    Eigen::MatrixXd out = raw;
    for (std::size_t j = 0; j < columns.size(); ++j) out.col(static_cast<Eigen::Index>(j)) /= columns[j].divisor;
    return out;
}

std::vector<double> ScalingInfo::apply(std::span<const double> row) const {
    if (row.size() != columns.size()) {
        throw Error(ErrorCode::DimensionMismatch, "scaling has " + std::to_string(columns.size()) +
                                                      " columns, row has " + std::to_string(row.size()));
    }
    std::vector<double> out(row.begin(), row.end());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] /= columns[j].divisor;
    return out;
}

std::vector<std::string> RankingScheme::ordered() const {
    std::vector<std::string> ids(ranks.size());
    for (const auto& [id, rank] : ranks) ids.at(static_cast<std::size_t>(rank - 1)) = id;
    return ids;
}

std::unordered_map<std::string, std::size_t> Dataset::household_index() const {
    std::unordered_map<std::string, std::size_t> index;
    index.reserve(households.size());
    for (std::size_t i = 0; i < households.size(); ++i) index.emplace(households[i].id, i);
    return index;
}

std::vector<std::string> Dataset::community_ids() const {
    std::set<std::string> ids;
    for (const auto& h : households) ids.insert(h.community_id);
    return {ids.begin(), ids.end()};
}

std::vector<std::string> Dataset::ranked_community_ids() const {
    std::set<std::string> ids;
    for (const auto& s : rankings) ids.insert(s.community_id);
    return {ids.begin(), ids.end()};
}

std::vector<std::string> Dataset::ranker_ids() const {
    std::set<std::string> ids;
    for (const auto& s : rankings) ids.insert(s.ranker_id);
    return {ids.begin(), ids.end()};
}

std::vector<std::string> Dataset::communities_in_split(const std::string& label) const {
    std::vector<std::string> out;
    for (const auto& [community, split] : splits) {
        if (split == label) out.push_back(community);
    }
    return out;
}

Dataset Dataset::select_communities(const std::set<std::string>& communities) const {
    Dataset out;
    out.covariate_names = covariate_names;
    out.elite_columns = elite_columns;
    out.scaling = scaling;
    for (const auto& h : households) {
        if (communities.contains(h.community_id)) out.households.push_back(h);
    }
    for (const auto& s : rankings) {
        if (communities.contains(s.community_id)) out.rankings.push_back(s);
    }
    for (const auto& h : survey) {
        if (communities.contains(h.community_id)) out.survey.push_back(h);
    }
    for (const auto& [c, q] : quotas) {
        if (communities.contains(c)) out.quotas.emplace(c, q);
    }
    for (const auto& [c, s] : splits) {
        if (communities.contains(c)) out.splits.emplace(c, s);
    }
    return out;
}

Dataset Dataset::drop_columns(const std::set<std::size_t>& columns) const {
    if (columns.empty()) return *this;
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < covariate_names.size(); ++j) {
        if (!columns.contains(j)) keep.push_back(j);
    }
    auto project = [&keep](const std::vector<double>& x) {
        std::vector<double> out;
        out.reserve(keep.size());
        for (auto j : keep) out.push_back(x.at(j));
        return out;
    };
    Dataset out = *this;
    out.covariate_names.clear();
    out.elite_columns.clear();
    for (std::size_t k = 0; k < keep.size(); ++k) {
        out.covariate_names.push_back(covariate_names[keep[k]]);
        if (std::find(elite_columns.begin(), elite_columns.end(), keep[k]) != elite_columns.end()) {
            out.elite_columns.push_back(k);
        }
    }
    for (auto& h : out.households) h.x = project(h.x);
    for (auto& h : out.survey) h.x = project(h.x);
    if (!scaling.empty()) {
        out.scaling.columns.clear();
        for (auto j : keep) out.scaling.columns.push_back(scaling.columns.at(j));
    }
    return out;
}

Dataset Dataset::standardized(const std::map<std::string, ColumnKind>& overrides) const {
    const auto result = standardize_covariates(covariate_matrix(), covariate_names, overrides);
    Dataset out = *this;
    out.scaling = result.info;
    for (std::size_t i = 0; i < out.households.size(); ++i) {
        const auto row = result.scaled.row(static_cast<Eigen::Index>(i));
        out.households[i].x.assign(row.begin(), row.end());
    }
    for (auto& h : out.survey) h.x = result.info.apply(h.x);
    return out;
}

Eigen::MatrixXd Dataset::covariate_matrix() const {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(households.size()), static_cast<Eigen::Index>(covariate_names.size()));
    for (std::size_t i = 0; i < households.size(); ++i) {
        for (std::size_t j = 0; j < covariate_names.size(); ++j) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = households[i].x.at(j);
        }
    }
    return x;
}

void Dataset::validate() const {
    const auto index = household_index();
    if (index.size() != households.size()) throw Error(ErrorCode::DuplicateHouseholdId, "duplicate household ids in dataset");
    for (const auto& h : households) {
        if (h.x.size() != covariate_names.size()) {
            throw Error(ErrorCode::DimensionMismatch, "household '" + h.id + "' has wrong covariate count");
        }
    }
    for (auto j : elite_columns) {
        if (j >= covariate_names.size()) throw Error(ErrorCode::DimensionMismatch, "elite column index out of range");
    }
    std::map<std::string, int> community_size;
    for (const auto& h : households) ++community_size[h.community_id];
    for (const auto& s : rankings) {
        for (const auto& [id, rank] : s.ranks) {
            if (!index.contains(id)) throw Error(ErrorCode::UnknownHousehold, "ranking references unknown household '" + id + "'");
            (void)rank;
        }
    }
    for (const auto& [community, q] : quotas) {
        const auto it = community_size.find(community);
        if (it == community_size.end()) continue;
        if (q < 1 || q > it->second) {
            throw Error(ErrorCode::InvalidQuota, "quota " + std::to_string(q) + " for community '" + community +
                                                     "' outside 1.." + std::to_string(it->second));
        }
    }
    for (const auto& h : survey) {
        if (h.x.size() != covariate_names.size() || !h.y) {
            throw Error(ErrorCode::DimensionMismatch, "survey row '" + h.id + "' is incomplete");
        }
    }
}

Census load_census(const std::filesystem::path& path) {
    const auto table = csv::read(path);
    const std::string source = path.string();
    const auto id_col = table.require_column(kHouseholdId, source);
    const auto community_col = table.require_column(kCommunityId, source);
    const auto split_col = table.column(kSplit);

    Census census;
    std::vector<std::size_t> covariate_cols;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        if (j == id_col || j == community_col || (split_col && j == *split_col)) continue;
        if (table.header[j].starts_with("elite_")) census.elite_columns.push_back(covariate_cols.size());
        covariate_cols.push_back(j);
        census.covariate_names.push_back(table.header[j]);
    }

    std::set<std::string> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        Household h;
        h.id = row[id_col];
        h.community_id = row[community_col];
        if (h.id.empty()) throw Error(ErrorCode::MissingColumn, source + ":" + std::to_string(table.line_numbers[r]) + ": empty household_id");
        if (!seen.insert(h.id).second) {
            throw Error(ErrorCode::DuplicateHouseholdId, source + ":" + std::to_string(table.line_numbers[r]) +
                                                             ": duplicate household_id '" + h.id + "'");
        }
        h.x.reserve(covariate_cols.size());
        for (auto j : covariate_cols) {
            const auto value = csv::parse_double(row[j]);
            if (!value || !std::isfinite(*value)) {
                throw Error(ErrorCode::NonNumericCovariate, source + ": row " + std::to_string(table.line_numbers[r]) +
                                                                ", column '" + table.header[j] + "': value '" + row[j] +
                                                                "' is not numeric");
            }
            h.x.push_back(*value);
        }
        if (split_col) {
            const auto& label = row[*split_col];
            auto [it, inserted] = census.splits.emplace(h.community_id, label);
            if (!inserted && it->second != label) {
                throw Error(ErrorCode::CommunityMismatch, source + ": community '" + h.community_id + "' has several split labels");
            }
        }
        census.households.push_back(std::move(h));
    }
    return census;
}

std::vector<RankingScheme> parse_rankings_table(const csv::Table& table, const std::string& source,
                                                const std::vector<Household>& census) {
    const auto community_col = table.require_column(kCommunityId, source);
    const auto ranker_col = table.require_column("ranker_id", source);
    const auto household_col = table.require_column(kHouseholdId, source);
    const auto rank_col = table.require_column("rank", source);

    std::unordered_map<std::string, const Household*> by_id;
    std::map<std::string, std::set<std::string>> members;
    for (const auto& h : census) {
        by_id.emplace(h.id, &h);
        members[h.community_id].insert(h.id);
    }

    std::map<std::pair<std::string, std::string>, RankingScheme> schemes;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = source + ":" + std::to_string(table.line_numbers[r]);
        const auto it = by_id.find(row[household_col]);
        if (it == by_id.end()) {
            throw Error(ErrorCode::UnknownHousehold, where + ": household '" + row[household_col] + "' is not in the census");
        }
        if (it->second->community_id != row[community_col]) {
            throw Error(ErrorCode::CommunityMismatch, where + ": household '" + row[household_col] + "' belongs to community '" +
                                                          it->second->community_id + "', not '" + row[community_col] + "'");
        }
        const auto rank = parse_int(row[rank_col]);
        if (!rank) throw Error(ErrorCode::NotAPermutation, where + ": rank '" + row[rank_col] + "' is not an integer");
        auto& scheme = schemes[{row[community_col], row[ranker_col]}];
        scheme.community_id = row[community_col];
        scheme.ranker_id = row[ranker_col];
        if (!scheme.ranks.emplace(row[household_col], *rank).second) {
            throw Error(ErrorCode::NotAPermutation, where + ": household '" + row[household_col] + "' ranked twice by ranker '" +
                                                        scheme.ranker_id + "'");
        }
    }

    std::vector<RankingScheme> out;
    for (auto& [key, scheme] : schemes) {
        const auto n = static_cast<int>(scheme.ranks.size());
        std::vector<bool> used(static_cast<std::size_t>(n), false);
        for (const auto& [id, rank] : scheme.ranks) {
            if (rank < 1 || rank > n || used[static_cast<std::size_t>(rank - 1)]) {
                throw Error(ErrorCode::NotAPermutation, source + ": community '" + key.first + "', ranker '" + key.second +
                                                            "': ranks are not a permutation of 1.." + std::to_string(n));
            }
            used[static_cast<std::size_t>(rank - 1)] = true;
        }
        std::set<std::string> ranked;
        for (const auto& [id, rank] : scheme.ranks) ranked.insert(id);
        if (ranked != members[key.first]) {
            throw Error(ErrorCode::CommunityMismatch, source + ": community '" + key.first + "', ranker '" + key.second +
                                                          "' does not rank exactly the community's households");
        }
        out.push_back(std::move(scheme));
    }
    return out;
}

std::vector<RankingScheme> load_rankings(const std::filesystem::path& path, const std::vector<Household>& census) {
    return parse_rankings_table(csv::read(path), path.string(), census);
}

std::vector<RankingScheme> parse_rankings(const std::string& text, const std::vector<Household>& census) {
    return parse_rankings_table(csv::parse(text), "<rankings>", census);
}

std::vector<Household> load_survey(const std::filesystem::path& path, const std::vector<std::string>& covariate_names) {
    const auto table = csv::read(path);
    const std::string source = path.string();
    const auto id_col = table.require_column(kHouseholdId, source);
    const auto community_col = table.require_column(kCommunityId, source);
    const auto y_col = table.require_column("y", source);
    std::vector<std::size_t> cols;
    for (const auto& name : covariate_names) cols.push_back(table.require_column(name, source));

    std::vector<Household> out;
    std::set<std::string> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        Household h;
        h.id = row[id_col];
        h.community_id = row[community_col];
        if (!seen.insert(h.id).second) {
            throw Error(ErrorCode::DuplicateHouseholdId, source + ": duplicate household_id '" + h.id + "'");
        }
        auto numeric = [&](std::size_t j) {
            const auto value = csv::parse_double(row[j]);
            if (!value || !std::isfinite(*value)) {
                throw Error(ErrorCode::NonNumericCovariate, source + ": row " + std::to_string(table.line_numbers[r]) +
                                                                ", column '" + table.header[j] + "': value '" + row[j] +
                                                                "' is not numeric");
            }
            return *value;
        };
        h.y = numeric(y_col);
        for (auto j : cols) h.x.push_back(numeric(j));
        out.push_back(std::move(h));
    }
    return out;
}

std::map<std::string, int> load_quotas(const std::filesystem::path& path) {
    const auto table = csv::read(path);
    const std::string source = path.string();
    const auto community_col = table.require_column(kCommunityId, source);
    const auto quota_col = table.require_column("quota", source);
    std::map<std::string, int> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto q = parse_int(table.rows[r][quota_col]);
        if (!q) throw Error(ErrorCode::InvalidQuota, source + ":" + std::to_string(table.line_numbers[r]) + ": quota is not an integer");
        out[table.rows[r][community_col]] = *q;
    }
    return out;
}

Dataset load_dataset(const std::filesystem::path& census_path, const std::filesystem::path& rankings_path,
                     const std::optional<std::filesystem::path>& survey_path,
                     const std::optional<std::filesystem::path>& quotas_path) {
    auto census = load_census(census_path);
    Dataset data;
    data.rankings = load_rankings(rankings_path, census.households);
    data.covariate_names = std::move(census.covariate_names);
    data.elite_columns = std::move(census.elite_columns);
    data.households = std::move(census.households);
    data.splits = std::move(census.splits);
    if (survey_path) data.survey = load_survey(*survey_path, data.covariate_names);
    if (quotas_path) data.quotas = load_quotas(*quotas_path);
    data.validate();
    return data;
}

std::string census_to_csv(const Dataset& data) {
    std::ostringstream out;
    const bool with_split = !data.splits.empty();
    out << "household_id,community_id";
    if (with_split) out << ",split";
    for (const auto& name : data.covariate_names) out << ',' << csv::escape(name);
    out << '\n';
    for (const auto& h : data.households) {
        out << csv::escape(h.id) << ',' << csv::escape(h.community_id);
        if (with_split) {
            const auto it = data.splits.find(h.community_id);
            out << ',' << (it == data.splits.end() ? std::string() : csv::escape(it->second));
        }
        for (double v : h.x) out << ',' << csv::format_double(v);
        out << '\n';
    }
    return out.str();
}

std::string rankings_to_csv(const std::vector<RankingScheme>& rankings) {
    std::ostringstream out;
    out << "community_id,ranker_id,household_id,rank\n";
    for (const auto& s : rankings) {
        const auto ids = s.ordered();
        for (std::size_t h = 0; h < ids.size(); ++h) {
            out << csv::escape(s.community_id) << ',' << csv::escape(s.ranker_id) << ',' << csv::escape(ids[h]) << ','
                << (h + 1) << '\n';
        }
    }
    return out.str();
}

std::string survey_to_csv(const Dataset& data) {
    std::ostringstream out;
    out << "household_id,community_id,y";
    for (const auto& name : data.covariate_names) out << ',' << csv::escape(name);
    out << '\n';
    for (const auto& h : data.survey) {
        out << csv::escape(h.id) << ',' << csv::escape(h.community_id) << ',' << csv::format_double(h.y.value_or(0.0));
        for (double v : h.x) out << ',' << csv::format_double(v);
        out << '\n';
    }
    return out.str();
}

std::string quotas_to_csv(const std::map<std::string, int>& quotas) {
    std::ostringstream out;
    out << "community_id,quota\n";
    for (const auto& [c, q] : quotas) out << csv::escape(c) << ',' << q << '\n';
    return out.str();
}

Standardized standardize_covariates(const Eigen::MatrixXd& raw, const std::vector<std::string>& names,
                                    const std::map<std::string, ColumnKind>& overrides) {
    if (raw.rows() < 2) throw Error(ErrorCode::InvalidArgument, "standardization needs at least 2 rows");
    if (!names.empty() && names.size() != static_cast<std::size_t>(raw.cols())) {
        throw Error(ErrorCode::DimensionMismatch, "column name count does not match matrix");
    }
    Standardized out;
    out.scaled = raw;
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
        ColumnScaling col;
        col.name = names.empty() ? "column " + std::to_string(j) : names[static_cast<std::size_t>(j)];
        const auto values = raw.col(j);
        const double sd = sample_sd(values);
        if (!(sd > 0.0)) throw Error(ErrorCode::ZeroVarianceColumn, "column '" + col.name + "' is constant");
        const auto forced = overrides.find(col.name);
        col.kind = forced != overrides.end() ? forced->second : (is_binary(values) ? ColumnKind::Binary : ColumnKind::Continuous);
        col.divisor = col.kind == ColumnKind::Binary ? 1.0 : 2.0 * sd;
        out.scaled.col(j) /= col.divisor;
        out.info.columns.push_back(std::move(col));
    }
    return out;
}

std::vector<int> rank_of(std::span<const double> values, bool* tied) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<int> ranks(values.size());
    bool any_tie = false;
    for (std::size_t h = 0; h < order.size(); ++h) {
        ranks[order[h]] = static_cast<int>(h + 1);
        if (h > 0 && values[order[h]] == values[order[h - 1]]) any_tie = true;
    }
    if (tied) *tied = any_tie;
    return ranks;
}

} // namespace ht
