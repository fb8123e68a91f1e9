#pragma once

#include "hybridtarget/gibbs.hpp"

#include <string>
#include <vector>

namespace ht {

inline constexpr double kDefaultInflation = 1.5;
inline constexpr double kDefaultShrink = 0.1;
inline constexpr double kPriorVarianceFloor = 1e-6;

/// Priors for the next period, built from the previous period's draws under
/// an independence approximation: one normal per coefficient and one
/// three-point distribution per ranker.
struct UpdatedPrior {
    std::vector<std::string> covariate_names;
    DiagonalGaussian delta;
    std::vector<std::string> ranker_ids;
    std::vector<OmegaProbs> omega;
    std::array<double, 3> omega_support{0.5, 1.0, 2.0};
    double inflation = kDefaultInflation;
    double shrink = kDefaultShrink;
    int period = 2;
};

/// Sample mean and (1/B) sample variance per coefficient, variance scaled by
/// `inflation` and floored at kPriorVarianceFloor.
DiagonalGaussian approximate_delta_prior(const PosteriorSamples& samples, double inflation);

/// Empirical frequency of each support value, blended toward uniform:
/// a_l = (1 - shrink) * freq_l + shrink / 3.
std::vector<OmegaProbs> approximate_omega_prior(const PosteriorSamples& samples, double shrink);

UpdatedPrior compose_updated_priors(const PosteriorSamples& samples, double inflation = kDefaultInflation,
                                    double shrink = kDefaultShrink);

/// Copy of `base` whose delta and omega priors come from `prior`.
ModelSpec apply_updated_prior(ModelSpec base, const UpdatedPrior& prior, const std::string& source = "updated");

} // namespace ht
