#pragma once

#include "hybridtarget/data.hpp"
#include "hybridtarget/random.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace ht {

/// Synthetic population drawn from the ranking model. Communities are laid
/// out train first, then test, then aux.
struct GenConfig {
    int n_train = 20;
    int n_test = 0;
    int n_aux = 0;
    int households_per_community = 10;
    int n_binary = 2;
    int n_continuous = 3;
    int n_rankers = 3;

    std::vector<double> delta_true;  // empty: default pattern
    std::vector<double> omega_true;  // empty: 2.0 for every ranker
    double alpha_sd = 1.0;

    bool elite = false;
    double elite_prevalence = 0.1;
    double elite_effect = -1.0;

    std::vector<double> gamma_true; // empty: delta_true plus N(0, gamma_perturbation_sd^2)
    double gamma_perturbation_sd = 0.1;
    double phi_true = 0.0;
    double sigma_psi_true = 0.5;
    /// Share of each community's households that appear in the survey.
    double survey_share = 1.0;

    double quota_share = 0.3;
    /// Rankers (0-based) whose rankings are replaced by uniform permutations.
    std::vector<int> shuffled_rankers;
    std::uint64_t seed = 1;

    int n_communities() const { return n_train + n_test + n_aux; }
    int n_covariates() const { return n_binary + n_continuous; }
    std::vector<double> resolved_delta() const;
    std::vector<double> resolved_omega() const;
    void validate() const;
};

struct TruthRecord {
    std::vector<std::string> covariate_names; // elite-free covariates
    std::vector<double> delta;
    std::vector<double> gamma;
    std::vector<std::string> ranker_ids;
    std::vector<double> omega;
    double elite_effect = 0.0;
    double phi = 0.0;
    double sigma_psi = 0.0;

    std::vector<std::string> household_ids;
    std::vector<std::string> household_community;
    std::vector<double> alpha;
    std::vector<double> score; // alpha + x delta, elite term excluded
    std::vector<bool> poor;

    /// community -> truly poor household ids
    std::map<std::string, std::set<std::string>> poor_sets() const;
};

struct Generated {
    Dataset data;
    TruthRecord truth;
};

Generated generate_dataset(const GenConfig& cfg, RngStream& rng);

std::string truth_to_csv(const TruthRecord& truth);
TruthRecord load_truth(const std::filesystem::path& path);

/// Write census.csv, rankings.csv, survey.csv, quotas.csv and truth.csv.
std::vector<std::filesystem::path> write_generated(const Generated& gen, const std::filesystem::path& out_dir);

} // namespace ht
