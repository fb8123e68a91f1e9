#include "hybridtarget/synthetic.hpp"

#include "hybridtarget/csv.hpp"
#include "hybridtarget/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace ht {

namespace {

const std::vector<double> kDefaultDelta{1.0, -0.8, 0.6, -0.5, 0.3};

std::string padded(const char* prefix, int k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%03d", prefix, k);
    return buf;
}

std::string join(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ";" : "") + csv::format_double(v[i]);
    return out;
}

std::vector<double> split_doubles(const std::string& text) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ';')) {
        auto v = csv::parse_double(item);
        if (!v) throw Error(ErrorCode::InvalidArgument, "bad number '" + item + "' in truth file");
        out.push_back(*v);
    }
    return out;
}

std::vector<std::string> split_strings(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ';')) out.push_back(item);
    return out;
}

} // namespace

std::vector<double> GenConfig::resolved_delta() const {
    if (!delta_true.empty()) return delta_true;
    std::vector<double> out;
    for (int p = 0; p < n_covariates(); ++p) out.push_back(kDefaultDelta[static_cast<std::size_t>(p) % kDefaultDelta.size()]);
    return out;
}

std::vector<double> GenConfig::resolved_omega() const {
    if (!omega_true.empty()) return omega_true;
    return std::vector<double>(static_cast<std::size_t>(n_rankers), 2.0);
}

void GenConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
    if (n_train < 0 || n_test < 0 || n_aux < 0 || n_communities() < 1) fail("need at least one community");
    if (households_per_community < 2) fail("households_per_community must be >= 2");
    if (n_binary < 0 || n_continuous < 0 || n_covariates() < 1) fail("need at least one covariate");
    if (n_rankers < 1) fail("n_rankers must be >= 1");
    if (!delta_true.empty() && delta_true.size() != static_cast<std::size_t>(n_covariates())) {
        fail("delta_true has " + std::to_string(delta_true.size()) + " entries, expected " + std::to_string(n_covariates()));
    }
    if (!omega_true.empty() && omega_true.size() != static_cast<std::size_t>(n_rankers)) fail("omega_true needs one entry per ranker");
    for (double w : resolved_omega()) {
        if (!(w > 0.0) || !std::isfinite(w)) fail("omega_true entries must be positive");
    }
    if (!gamma_true.empty() && gamma_true.size() != static_cast<std::size_t>(n_covariates())) fail("gamma_true needs one entry per covariate");
    if (!(quota_share > 0.0 && quota_share < 1.0)) fail("quota_share must lie in (0, 1)");
    if (!(elite_prevalence >= 0.0 && elite_prevalence <= 1.0)) fail("elite_prevalence must lie in [0, 1]");
    if (!(survey_share >= 0.0 && survey_share <= 1.0)) fail("survey_share must lie in [0, 1]");
    if (!(alpha_sd >= 0.0) || !(sigma_psi_true >= 0.0) || !(gamma_perturbation_sd >= 0.0)) fail("standard deviations must be >= 0");
    for (int r : shuffled_rankers) {
        if (r < 0 || r >= n_rankers) fail("shuffled ranker index out of range");
    }
}

std::map<std::string, std::set<std::string>> TruthRecord::poor_sets() const {
    std::map<std::string, std::set<std::string>> out;
    for (std::size_t i = 0; i < household_ids.size(); ++i) {
        if (poor[i]) out[household_community[i]].insert(household_ids[i]);
    }
    return out;
}

Generated generate_dataset(const GenConfig& cfg, RngStream& rng) {
    cfg.validate();
    const auto delta = cfg.resolved_delta();
    const auto omega = cfg.resolved_omega();
    const int k_total = cfg.n_communities();
    const int n_h = cfg.households_per_community;
    const auto p = static_cast<std::size_t>(cfg.n_covariates());

    Generated gen;
    Dataset& data = gen.data;
    TruthRecord& truth = gen.truth;
    for (std::size_t j = 0; j < p; ++j) data.covariate_names.push_back("x" + std::to_string(j + 1));
    truth.covariate_names = data.covariate_names;
    if (cfg.elite) {
        data.elite_columns.push_back(p);
        data.covariate_names.push_back("elite_connected");
    }

    for (int k = 0; k < k_total; ++k) {
        const std::string community = padded("c", k + 1);
        data.splits[community] = k < cfg.n_train ? "train" : (k < cfg.n_train + cfg.n_test ? "test" : "aux");
        for (int i = 0; i < n_h; ++i) {
            Household h;
            h.id = community + "_" + padded("h", i + 1);
            h.community_id = community;
            for (int j = 0; j < cfg.n_binary; ++j) h.x.push_back(rng.uniform() < 0.5 ? 1.0 : 0.0);
            for (int j = 0; j < cfg.n_continuous; ++j) h.x.push_back(rng.normal());
            if (cfg.elite) h.x.push_back(rng.uniform() < cfg.elite_prevalence ? 1.0 : 0.0);
            data.households.push_back(std::move(h));
        }
    }

    const std::size_t n = data.households.size();
    truth.delta = delta;
    truth.omega = omega;
    truth.elite_effect = cfg.elite ? cfg.elite_effect : 0.0;
    truth.phi = cfg.phi_true;
    truth.sigma_psi = cfg.sigma_psi_true;
    for (int r = 0; r < cfg.n_rankers; ++r) truth.ranker_ids.push_back("r" + std::to_string(r + 1));

    for (const auto& h : data.households) {
        const double a = cfg.alpha_sd * rng.normal();
        double s = a;
        for (std::size_t j = 0; j < p; ++j) s += h.x[j] * delta[j];
        truth.household_ids.push_back(h.id);
        truth.household_community.push_back(h.community_id);
        truth.alpha.push_back(a);
        truth.score.push_back(s);
    }

    for (int k = 0; k < k_total; ++k) {
        const auto first = static_cast<std::size_t>(k * n_h);
        const std::string& community = data.households[first].community_id;
        for (int r = 0; r < cfg.n_rankers; ++r) {
            const double noise_sd = 1.0 / std::sqrt(omega[static_cast<std::size_t>(r)]);
            std::vector<double> latent(static_cast<std::size_t>(n_h));
            for (int i = 0; i < n_h; ++i) {
                const auto idx = first + static_cast<std::size_t>(i);
                double z = truth.score[idx] + noise_sd * rng.normal();
                if (cfg.elite) z += data.households[idx].x[p] * cfg.elite_effect;
                latent[static_cast<std::size_t>(i)] = z;
            }
            RankingScheme scheme;
            scheme.community_id = community;
            scheme.ranker_id = truth.ranker_ids[static_cast<std::size_t>(r)];
            const auto ranks = rank_of(latent);
            for (int i = 0; i < n_h; ++i) {
                scheme.ranks[data.households[first + static_cast<std::size_t>(i)].id] = ranks[static_cast<std::size_t>(i)];
            }
            data.rankings.push_back(std::move(scheme));
        }
    }

    truth.gamma = cfg.gamma_true;
    if (truth.gamma.empty()) {
        for (double d : delta) truth.gamma.push_back(d + cfg.gamma_perturbation_sd * rng.normal());
    }
    const int surveyed = static_cast<int>(std::lround(cfg.survey_share * n_h));
    for (std::size_t idx = 0; idx < n; ++idx) {
        const double noise = cfg.sigma_psi_true * rng.normal();
        if (static_cast<int>(idx % static_cast<std::size_t>(n_h)) >= surveyed) continue;
        Household h = data.households[idx];
        double y = cfg.phi_true + noise;
        for (std::size_t j = 0; j < p; ++j) y += h.x[j] * truth.gamma[j];
        h.y = y;
        data.survey.push_back(std::move(h));
    }

    for (int r : cfg.shuffled_rankers) {
        for (auto& scheme : data.rankings) {
            if (scheme.ranker_id != truth.ranker_ids[static_cast<std::size_t>(r)]) continue;
            std::vector<int> perm;
            for (const auto& kv : scheme.ranks) perm.push_back(kv.second);
            for (std::size_t i = perm.size(); i > 1; --i) {
                const auto j = static_cast<std::size_t>(rng() % i);
                std::swap(perm[i - 1], perm[j]);
            }
            std::size_t i = 0;
            for (auto& kv : scheme.ranks) kv.second = perm[i++];
        }
    }

    const int quota = std::max(1, static_cast<int>(std::lround(cfg.quota_share * n_h)));
    truth.poor.assign(n, false);
    for (int k = 0; k < k_total; ++k) {
        const auto first = static_cast<std::size_t>(k * n_h);
        std::vector<double> s(truth.score.begin() + static_cast<std::ptrdiff_t>(first),
                              truth.score.begin() + static_cast<std::ptrdiff_t>(first) + n_h);
        const auto ranks = rank_of(s);
        for (int i = 0; i < n_h; ++i) truth.poor[first + static_cast<std::size_t>(i)] = ranks[static_cast<std::size_t>(i)] <= quota;
        data.quotas[data.households[first].community_id] = quota;
    }
    data.validate();
    return gen;
}

std::string truth_to_csv(const TruthRecord& truth) {
    std::ostringstream out;
    out << "# covariates=";
    for (std::size_t i = 0; i < truth.covariate_names.size(); ++i) out << (i ? ";" : "") << truth.covariate_names[i];
    out << "\n# delta=" << join(truth.delta) << "\n# gamma=" << join(truth.gamma) << "\n# rankers=";
    for (std::size_t i = 0; i < truth.ranker_ids.size(); ++i) out << (i ? ";" : "") << truth.ranker_ids[i];
    out << "\n# omega=" << join(truth.omega) << "\n# elite_effect=" << csv::format_double(truth.elite_effect)
        << "\n# phi=" << csv::format_double(truth.phi) << "\n# sigma_psi=" << csv::format_double(truth.sigma_psi) << '\n';
    out << "household_id,community_id,alpha,score,poor\n";
    for (std::size_t i = 0; i < truth.household_ids.size(); ++i) {
        out << csv::escape(truth.household_ids[i]) << ',' << csv::escape(truth.household_community[i]) << ','
            << csv::format_double(truth.alpha[i]) << ',' << csv::format_double(truth.score[i]) << ','
            << (truth.poor[i] ? 1 : 0) << '\n';
    }
    return out.str();
}

TruthRecord load_truth(const std::filesystem::path& path) {
    const auto table = csv::read(path);
    const std::string source = path.string();
    TruthRecord truth;
    for (const auto& line : table.comments) {
        auto body = line.substr(line.find_first_not_of("# "));
        const auto eq = body.find('=');
        if (eq == std::string::npos) continue;
        const auto key = body.substr(0, eq);
        const auto value = body.substr(eq + 1);
        if (key == "covariates") truth.covariate_names = split_strings(value);
        else if (key == "delta") truth.delta = split_doubles(value);
        else if (key == "gamma") truth.gamma = split_doubles(value);
        else if (key == "rankers") truth.ranker_ids = split_strings(value);
        else if (key == "omega") truth.omega = split_doubles(value);
        else if (key == "elite_effect") truth.elite_effect = split_doubles(value).at(0);
        else if (key == "phi") truth.phi = split_doubles(value).at(0);
        else if (key == "sigma_psi") truth.sigma_psi = split_doubles(value).at(0);
    }
    const auto id_col = table.require_column("household_id", source);
    const auto community_col = table.require_column("community_id", source);
    const auto poor_col = table.require_column("poor", source);
    const auto alpha_col = table.column("alpha");
    const auto score_col = table.column("score");
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        truth.household_ids.push_back(row[id_col]);
        truth.household_community.push_back(row[community_col]);
        const auto flag = row[poor_col];
        if (flag != "0" && flag != "1") {
            throw Error(ErrorCode::InvalidArgument, source + ":" + std::to_string(table.line_numbers[r]) + ": poor must be 0 or 1");
        }
        truth.poor.push_back(flag == "1");
        truth.alpha.push_back(alpha_col ? csv::parse_double(row[*alpha_col]).value_or(0.0) : 0.0);
        truth.score.push_back(score_col ? csv::parse_double(row[*score_col]).value_or(0.0) : 0.0);
    }
    return truth;
}

std::vector<std::filesystem::path> write_generated(const Generated& gen, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::vector<std::pair<std::string, std::string>> files{
        {"census.csv", census_to_csv(gen.data)},
        {"rankings.csv", rankings_to_csv(gen.data.rankings)},
        {"survey.csv", survey_to_csv(gen.data)},
        {"quotas.csv", quotas_to_csv(gen.data.quotas)},
        {"truth.csv", truth_to_csv(gen.truth)},
    };
    std::vector<std::filesystem::path> written;
    for (const auto& [name, content] : files) {
        csv::write_atomic(out_dir / name, content);
        written.push_back(out_dir / name);
    }
    return written;
}

} // namespace ht
