#pragma once

#include "hybridtarget/data.hpp"
#include "hybridtarget/gibbs.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace ht {

/// method,name,posterior_mean,posterior_sd,q2.5,q97.5 for the delta block.
std::string coefficients_to_csv(const std::string& method, const PosteriorSamples& samples);

/// Covariate names and posterior means read back from coefficients.csv.
struct CoefficientTable {
    std::vector<std::string> names;
    Eigen::VectorXd mean;
};
CoefficientTable load_coefficients(const std::filesystem::path& path);

/// method,name,coefficient,standardized
std::string standardized_to_csv(const std::string& method, const std::vector<std::string>& names,
                                const Eigen::VectorXd& coefs);

struct CorrelationRow {
    std::string community_id;
    std::string ranker_id;
    double correlation;
};
std::string correlations_to_csv(const std::vector<CorrelationRow>& rows);

/// Per-draw dump of delta, omega, gamma and the hyperparameters, enough to
/// rebuild a PosteriorSamples for prior updating.
std::string samples_to_csv(const PosteriorSamples& samples);
PosteriorSamples load_samples(const std::filesystem::path& path);

std::string scaling_to_csv(const ScalingInfo& scaling);
ScalingInfo load_scaling(const std::filesystem::path& path);

std::string scores_to_csv(const std::vector<Household>& households, const Eigen::VectorXd& scores,
                          const std::map<std::string, std::set<std::string>>& selected);

} // namespace ht
