#include "hybridtarget/dynamic_update.hpp"

#include "hybridtarget/error.hpp"

#include <cmath>

namespace ht {

DiagonalGaussian approximate_delta_prior(const PosteriorSamples& samples, double inflation) {
    if (samples.draws() < 2) throw Error(ErrorCode::InsufficientSamples, "need at least 2 retained draws");
    if (!(inflation >= 1.0) || !std::isfinite(inflation)) throw Error(ErrorCode::InvalidArgument, "inflation must be >= 1");
    DiagonalGaussian out;
    out.mean = samples.delta_mean();
    const double b = static_cast<double>(samples.draws());
    out.var.resize(out.mean.size());
    for (Eigen::Index p = 0; p < out.mean.size(); ++p) {
        const double v = (samples.delta.col(p).array() - out.mean[p]).square().sum() / b;
        out.var[p] = std::max(v * inflation, kPriorVarianceFloor);
    }
    return out;
}

std::vector<OmegaProbs> approximate_omega_prior(const PosteriorSamples& samples, double shrink) {
    if (!samples.spec.multi_ranker) throw Error(ErrorCode::InvalidArgument, "samples carry no ranker precision draws");
    if (samples.draws() < 1 || samples.omega.rows() < 1) throw Error(ErrorCode::InsufficientSamples, "no omega draws");
    if (!(shrink >= 0.0 && shrink <= 1.0)) throw Error(ErrorCode::InvalidArgument, "shrink must lie in [0, 1]");
    const auto& support = samples.spec.omega_support;
    std::vector<OmegaProbs> out;
    for (Eigen::Index r = 0; r < samples.omega.cols(); ++r) {
        OmegaProbs counts{};
        for (Eigen::Index b = 0; b < samples.omega.rows(); ++b) {
            const double w = samples.omega(b, r);
            std::size_t nearest = 0;
            for (std::size_t l = 1; l < 3; ++l) {
                if (std::abs(support[l] - w) < std::abs(support[nearest] - w)) nearest = l;
            }
            counts[nearest] += 1.0;
        }
        OmegaProbs probs{};
        for (std::size_t l = 0; l < 3; ++l) {
            probs[l] = (1.0 - shrink) * counts[l] / static_cast<double>(samples.omega.rows()) + shrink / 3.0;
        }
        out.push_back(probs);
    }
    return out;
}

UpdatedPrior compose_updated_priors(const PosteriorSamples& samples, double inflation, double shrink) {
    UpdatedPrior prior;
    prior.covariate_names = samples.covariate_names;
    prior.delta = approximate_delta_prior(samples, inflation);
    if (samples.spec.multi_ranker) {
        prior.ranker_ids = samples.ranker_ids;
        prior.omega = approximate_omega_prior(samples, shrink);
    }
    prior.omega_support = samples.spec.omega_support;
    prior.inflation = inflation;
    prior.shrink = shrink;
    prior.period = samples.spec.period + 1;
    return prior;
}

ModelSpec apply_updated_prior(ModelSpec base, const UpdatedPrior& prior, const std::string& source) {
    base.delta_prior.clear();
    for (std::size_t p = 0; p < prior.covariate_names.size(); ++p) {
        const auto i = static_cast<Eigen::Index>(p);
        base.delta_prior[prior.covariate_names[p]] = {prior.delta.mean[i], prior.delta.var[i]};
    }
    base.omega_prior.clear();
    for (std::size_t r = 0; r < prior.ranker_ids.size(); ++r) base.omega_prior[prior.ranker_ids[r]] = prior.omega[r];
    base.omega_support = prior.omega_support;
    base.prior_source = source;
    base.period = prior.period;
    return base;
}

} // namespace ht
