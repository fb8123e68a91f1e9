#include "hybridtarget/targeting.hpp"

#include "hybridtarget/error.hpp"

#include <algorithm>
#include <cmath>

namespace ht {

Eigen::VectorXd compute_scores(const Eigen::MatrixXd& x, const Eigen::VectorXd& delta,
                               const std::set<std::size_t>& elite_columns) {
    if (x.cols() != delta.size()) {
        throw Error(ErrorCode::DimensionMismatch, "X has " + std::to_string(x.cols()) + " columns but delta has " +
                                                      std::to_string(delta.size()) + " entries");
    }
    Eigen::VectorXd d = delta;
    for (auto c : elite_columns) {
        if (c >= static_cast<std::size_t>(d.size())) throw Error(ErrorCode::DimensionMismatch, "elite column out of range");
        d[static_cast<Eigen::Index>(c)] = 0.0;
    }
    return x * d;
}

std::set<std::string> select_beneficiaries(const std::map<std::string, double>& scores, int quota) {
    if (quota < 0 || static_cast<std::size_t>(quota) > scores.size()) {
        throw Error(ErrorCode::InvalidQuota,
                    "quota " + std::to_string(quota) + " outside [0, " + std::to_string(scores.size()) + "]");
    }
    std::vector<std::pair<double, std::string>> order;
    order.reserve(scores.size());
    for (const auto& [id, s] : scores) {
        if (std::isnan(s)) throw Error(ErrorCode::InvalidArgument, "score for " + id + " is NaN");
        order.emplace_back(s, id);
    }
    std::sort(order.begin(), order.end());
    std::set<std::string> out;
    for (int i = 0; i < quota; ++i) out.insert(order[static_cast<std::size_t>(i)].second);
    return out;
}

ErrorRate error_rate(const std::set<std::string>& selected, const std::set<std::string>& truly_poor) {
    if (truly_poor.empty()) throw Error(ErrorCode::InvalidArgument, "no truly poor households");
    std::size_t hits = 0;
    for (const auto& id : selected) hits += truly_poor.count(id);
    ErrorRate out;
    out.rate = 1.0 - static_cast<double>(hits) / static_cast<double>(truly_poor.size());
    out.quota_mismatch = selected.size() != truly_poor.size();
    return out;
}

TargetingResult evaluate_targeting(const std::string& method, const std::map<std::string, double>& scores,
                                   const std::map<std::string, std::string>& community_of,
                                   const std::map<std::string, int>& quotas,
                                   const std::map<std::string, std::set<std::string>>& truly_poor) {
    TargetingResult out;
    out.method = method;
    out.scores = scores;
    std::map<std::string, std::map<std::string, double>> by_community;
    for (const auto& [id, s] : scores) {
        auto it = community_of.find(id);
        if (it == community_of.end()) throw Error(ErrorCode::UnknownHousehold, "no community for household " + id);
        by_community[it->second][id] = s;
    }
    std::size_t poor_total = 0;
    std::size_t hits_total = 0;
    for (const auto& [community, community_scores] : by_community) {
        auto q = quotas.find(community);
        if (q == quotas.end()) throw Error(ErrorCode::InvalidQuota, "no quota for community " + community);
        auto sel = select_beneficiaries(community_scores, q->second);
        auto truth = truly_poor.find(community);
        const std::set<std::string> empty;
        const auto& poor = truth == truly_poor.end() ? empty : truth->second;
        std::size_t hits = 0;
        for (const auto& id : sel) hits += poor.count(id);
        if (!poor.empty()) out.community_error[community] = 1.0 - static_cast<double>(hits) / static_cast<double>(poor.size());
        if (sel.size() != poor.size()) out.quota_mismatch = true;
        poor_total += poor.size();
        hits_total += hits;
        out.selected[community] = std::move(sel);
    }
    if (poor_total == 0) throw Error(ErrorCode::InvalidArgument, "no truly poor households in the evaluated communities");
    out.pooled_error = 1.0 - static_cast<double>(hits_total) / static_cast<double>(poor_total);
    return out;
}

Eigen::VectorXd standardized_coefficients(const Eigen::VectorXd& coefs) {
    if (coefs.size() == 0) throw Error(ErrorCode::AllZero, "no coefficients");
    const double mean_abs = coefs.cwiseAbs().mean();
    if (!(mean_abs > 0.0)) throw Error(ErrorCode::AllZero, "all coefficients are zero");
    return coefs / mean_abs;
}

namespace {

/// Average ranks (ties share the mean position).
std::vector<double> midranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) out[idx[k]] = r;
        i = j + 1;
    }
    return out;
}

} // namespace

double rank_correlation(const std::map<std::string, int>& a, const std::map<std::string, int>& b) {
    if (a.size() != b.size()) throw Error(ErrorCode::SetMismatch, "rankings cover different household sets");
    if (a.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two households");
    std::vector<double> va, vb;
    for (const auto& [id, r] : a) {
        auto it = b.find(id);
        if (it == b.end()) throw Error(ErrorCode::SetMismatch, "household " + id + " missing from second ranking");
        va.push_back(r);
        vb.push_back(it->second);
    }
    const auto ra = midranks(va);
    const auto rb = midranks(vb);
    const Eigen::Map<const Eigen::VectorXd> xa(ra.data(), static_cast<Eigen::Index>(ra.size()));
    const Eigen::Map<const Eigen::VectorXd> xb(rb.data(), static_cast<Eigen::Index>(rb.size()));
    const Eigen::VectorXd ca = xa.array() - xa.mean();
    const Eigen::VectorXd cb = xb.array() - xb.mean();
    const double denom = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
    if (!(denom > 0.0)) throw Error(ErrorCode::InvalidArgument, "constant ranking");
    return ca.dot(cb) / denom;
}

std::map<std::string, int> aggregate_model_ranking(const PosteriorSamples& samples, const std::string& community) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < samples.household_community.size(); ++i) {
        if (samples.household_community[i] == community) rows.push_back(i);
    }
    if (rows.empty()) throw Error(ErrorCode::UnknownCommunity, "community " + community + " not in the fitted data");
    const Eigen::VectorXd delta = samples.delta_mean();
    const Eigen::VectorXd alpha = samples.alpha_mean();
    std::vector<double> score;
    for (auto i : rows) {
        const auto r = static_cast<Eigen::Index>(i);
        score.push_back(samples.household_x.row(r).dot(delta) + (alpha.size() > r ? alpha[r] : 0.0));
    }
    const auto ranks = rank_of(score);
    std::map<std::string, int> out;
    for (std::size_t k = 0; k < rows.size(); ++k) out[samples.household_ids[rows[k]]] = ranks[k];
    return out;
}

} // namespace ht
