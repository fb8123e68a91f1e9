#pragma once

#include "hybridtarget/data.hpp"
#include "hybridtarget/random.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ht {

using OmegaProbs = std::array<double, 3>;

/// Which blocks of the ranking model are active, and their priors.
///
/// The basic model is the same engine with multi_ranker off: alpha stays at 0
/// and every ranker's precision stays at 1. With auxiliary on, delta and gamma
/// share the hierarchical N(mu, Sigma) prior and the delta prior fields below
/// are ignored.
struct ModelSpec {
    bool multi_ranker = true;
    bool auxiliary = false;
    bool elite = false;

    /// Default delta prior: N(0, delta_prior_sd^2 I).
    double delta_prior_sd = 2.5;
    /// Per-covariate overrides (by name) of the default normal prior.
    std::map<std::string, std::pair<double, double>> delta_prior; // name -> (mean, variance)

    std::array<double, 3> omega_support{0.5, 1.0, 2.0};
    OmegaProbs default_omega_prior{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    std::map<std::string, OmegaProbs> omega_prior; // ranker id -> prior probabilities

    std::string prior_source = "default";
    int period = 1;

    OmegaProbs omega_prior_for(const std::string& ranker) const;
    Eigen::VectorXd delta_prior_mean(const std::vector<std::string>& names) const;
    Eigen::MatrixXd delta_prior_cov(const std::vector<std::string>& names) const;
    void validate() const;
};

struct McmcConfig {
    int total_iterations = 4000;
    int burn_in = 2000;
    std::uint64_t seed = 1;
    bool retain_latent = false;
#ifdef NDEBUG
    bool check_rank_consistency = false;
#else
    bool check_rank_consistency = true;
#endif

    int retained() const { return total_iterations - burn_in; }
    void validate() const;
};

/// Ranked households laid out for sampling: one covariate row per household,
/// one scheme per (community, ranker) with households in ascending rank order.
struct RankedDesign {
    struct Scheme {
        std::string community_id;
        std::size_t ranker = 0;
        std::vector<std::size_t> order; // order[h] = household row ranked h+1
    };

    Eigen::MatrixXd x;
    std::vector<std::string> covariate_names;
    std::vector<std::size_t> elite_columns;
    std::vector<std::string> household_ids;
    std::vector<std::string> household_community;
    std::vector<std::string> ranker_ids;
    std::vector<Scheme> schemes;
    /// Per ranker: sum of x_i x_i^T over the households it ranks.
    std::vector<Eigen::MatrixXd> gram_by_ranker;
    /// Per household: the schemes ranking it and its position within each.
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> appearances;

    std::size_t households() const { return household_ids.size(); }
    std::size_t covariates() const { return static_cast<std::size_t>(x.cols()); }
    std::size_t rankers() const { return ranker_ids.size(); }
    std::size_t observations() const;

    static RankedDesign build(const Dataset& data);
};

/// Survey rows with a constant column appended last for the intercept.
struct SurveyDesign {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;

    std::size_t rows() const { return static_cast<std::size_t>(y.size()); }
    static SurveyDesign build(const Dataset& data);
};

struct LatentState {
    std::vector<std::vector<double>> latent; // per scheme, in rank order
    Eigen::VectorXd alpha;                   // per ranked household
    Eigen::VectorXd delta;
    Eigen::VectorXd omega;                   // per ranker
    Eigen::VectorXd gamma;                   // covariates then intercept
    double sigma_psi_sq = 1.0;
    Eigen::VectorXd mu;                      // same length as gamma
    double sigma_hyper = 1.0;

    static LatentState initial(const RankedDesign& design, const SurveyDesign* survey);
};

struct Gaussian {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Independent normals: element p ~ N(mean[p], var[p]).
struct DiagonalGaussian {
    Eigen::VectorXd mean;
    Eigen::VectorXd var;
};

struct ScaledInvChiSqParams {
    double df = 0.0;
    double scale_sum = 0.0;
};

struct Bounds {
    double lower;
    double upper;
};

/// Bounds for the household at rank position h (1-based) given latent values
/// stored in rank order.
Bounds latent_bounds(std::span<const double> latent_in_rank_order, std::size_t h);
Bounds latent_bounds(const RankingScheme& scheme, const std::map<std::string, double>& latent, std::size_t h);

void sample_latent_sweep(LatentState& state, const RankedDesign& design, RngStream& rng);
bool rank_consistent(const LatentState& state, const RankedDesign& design);

DiagonalGaussian alpha_params(const LatentState& state, const RankedDesign& design);
Gaussian delta_params(const LatentState& state, const RankedDesign& design, const Eigen::VectorXd& prior_mean,
                      const Eigen::MatrixXd& prior_cov);
Gaussian gamma_params(const LatentState& state, const SurveyDesign& survey, const Eigen::VectorXd& prior_mean,
                      const Eigen::MatrixXd& prior_cov);
OmegaProbs omega_probs(const LatentState& state, const RankedDesign& design, std::size_t ranker,
                       const std::array<double, 3>& support, const OmegaProbs& prior);
ScaledInvChiSqParams sigma_psi_params(const LatentState& state, const SurveyDesign& survey);
DiagonalGaussian mu_params(const LatentState& state);
ScaledInvChiSqParams sigma_hyper_params(const LatentState& state);

/// One full Gibbs iteration over the active blocks. Blocks are updated in
/// the order latent, alpha, delta, gamma, omega, sigma_psi, mu, Sigma.
class GibbsKernel {
public:
    GibbsKernel(const ModelSpec& spec, const RankedDesign& design, const SurveyDesign* survey);

    LatentState initial_state() const;
    void step(LatentState& state, RngStream& rng) const;

private:
    ModelSpec spec_;
    const RankedDesign& design_;
    const SurveyDesign* aux_;
    Eigen::VectorXd basic_prior_mean_;
    Eigen::MatrixXd basic_prior_precision_;
    std::vector<OmegaProbs> omega_priors_;
};

struct CoefficientSummary {
    std::string name;
    double mean = 0.0;
    double sd = 0.0;
    double q025 = 0.0;
    double q975 = 0.0;
};

/// Retained draws, one row per retained iteration.
struct PosteriorSamples {
    ModelSpec spec;
    McmcConfig config;
    std::vector<std::string> covariate_names;
    std::vector<std::size_t> elite_columns;
    std::vector<std::string> ranker_ids;
    std::vector<std::string> household_ids;
    std::vector<std::string> household_community;
    Eigen::MatrixXd household_x; // covariates of the ranked households

    Eigen::MatrixXd delta;
    Eigen::MatrixXd alpha;
    Eigen::MatrixXd omega;
    Eigen::MatrixXd gamma;
    Eigen::VectorXd sigma_psi_sq;
    Eigen::MatrixXd mu;
    Eigen::VectorXd sigma_hyper;
    std::vector<std::vector<std::vector<double>>> latent; // optional, [draw][scheme][position]

    std::size_t draws() const { return static_cast<std::size_t>(delta.rows()); }
    Eigen::VectorXd delta_mean() const;
    Eigen::VectorXd alpha_mean() const;
    Eigen::VectorXd omega_mean() const;
    std::vector<CoefficientSummary> summarize() const;
};

double column_quantile(const Eigen::VectorXd& values, double p);

/// Run the sampler from the initial state and keep the draws after burn-in.
PosteriorSamples run_gibbs(const ModelSpec& spec, const RankedDesign& design, const SurveyDesign* survey,
                           const McmcConfig& cfg, RngStream& rng);

/// Convenience wrapper: builds the designs from a dataset. The survey is used
/// only when spec.auxiliary is set.
PosteriorSamples fit(const ModelSpec& spec, const Dataset& data, const McmcConfig& cfg, RngStream& rng);

} // namespace ht
