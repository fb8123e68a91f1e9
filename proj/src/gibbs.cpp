#include "hybridtarget/gibbs.hpp"

#include "hybridtarget/error.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

namespace ht {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double standard_normal_quantile(double p) { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p); }

void check_probs(const OmegaProbs& probs, const std::string& what) {
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw Error(ErrorCode::InvalidConfig, what + ": probabilities must be nonnegative");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-8) throw Error(ErrorCode::InvalidConfig, what + ": probabilities must sum to 1");
}

Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& m, const char* what) {
    const Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotPositiveDefinite, std::string(what) + " is not positive definite");
    return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

/// Posterior for a normal linear model given the data precision and the
/// data-weighted right-hand side.
Gaussian conjugate_normal(const Eigen::MatrixXd& data_precision, const Eigen::VectorXd& data_rhs,
                          const Eigen::MatrixXd& prior_precision, const Eigen::VectorXd& prior_mean, const char* what) {
    const Eigen::MatrixXd precision = data_precision + prior_precision;
    const Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::NotPositiveDefinite,
                    std::string(what) + ": normal-equations matrix is singular (collinear covariates?)");
    }
    Gaussian out;
    out.cov = llt.solve(Eigen::MatrixXd::Identity(precision.rows(), precision.cols()));
    out.mean = llt.solve(data_rhs + prior_precision * prior_mean);
    return out;
}

Eigen::VectorXd linear_index(const RankedDesign& design, const Eigen::VectorXd& delta) { return design.x * delta; }

} // namespace

OmegaProbs ModelSpec::omega_prior_for(const std::string& ranker) const {
    const auto it = omega_prior.find(ranker);
    return it == omega_prior.end() ? default_omega_prior : it->second;
}

Eigen::VectorXd ModelSpec::delta_prior_mean(const std::vector<std::string>& names) const {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(names.size()));
    for (std::size_t p = 0; p < names.size(); ++p) {
        if (auto it = delta_prior.find(names[p]); it != delta_prior.end()) mean[static_cast<Eigen::Index>(p)] = it->second.first;
    }
    return mean;
}

Eigen::MatrixXd ModelSpec::delta_prior_cov(const std::vector<std::string>& names) const {
    const auto n = static_cast<Eigen::Index>(names.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(n, n) * (delta_prior_sd * delta_prior_sd);
    for (std::size_t p = 0; p < names.size(); ++p) {
        if (auto it = delta_prior.find(names[p]); it != delta_prior.end()) {
            cov(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)) = it->second.second;
        }
    }
    return cov;
}

void ModelSpec::validate() const {
    if (!(delta_prior_sd > 0.0) || !std::isfinite(delta_prior_sd)) throw Error(ErrorCode::InvalidConfig, "delta_prior_sd must be positive");
    for (const auto& [name, mv] : delta_prior) {
        if (!std::isfinite(mv.first) || !(mv.second > 0.0) || !std::isfinite(mv.second)) {
            throw Error(ErrorCode::InvalidConfig, "delta prior for '" + name + "' needs a finite mean and positive variance");
        }
    }
    for (double w : omega_support) {
        if (!(w > 0.0) || !std::isfinite(w)) throw Error(ErrorCode::InvalidConfig, "omega support values must be positive");
    }
    check_probs(default_omega_prior, "default omega prior");
    for (const auto& [ranker, probs] : omega_prior) check_probs(probs, "omega prior for ranker '" + ranker + "'");
}

void McmcConfig::validate() const {
    if (total_iterations <= 0) throw Error(ErrorCode::InvalidConfig, "iterations must be positive");
    if (burn_in < 0 || burn_in >= total_iterations) throw Error(ErrorCode::InvalidConfig, "burn_in must satisfy 0 <= burn_in < iterations");
}

std::size_t RankedDesign::observations() const {
    std::size_t n = 0;
    for (const auto& s : schemes) n += s.order.size();
    return n;
}

RankedDesign RankedDesign::build(const Dataset& data) {
    if (data.rankings.empty()) throw Error(ErrorCode::InvalidArgument, "dataset has no rankings");
    RankedDesign design;
    const auto index = data.household_index();

    std::set<std::string> ranked;
    for (const auto& s : data.rankings) {
        for (const auto& [id, rank] : s.ranks) ranked.insert(id);
    }
    std::unordered_map<std::string, std::size_t> row_of;
    for (const auto& h : data.households) {
        if (ranked.contains(h.id)) {
            row_of.emplace(h.id, design.household_ids.size());
            design.household_ids.push_back(h.id);
            design.household_community.push_back(h.community_id);
        }
    }
    if (row_of.size() != ranked.size()) throw Error(ErrorCode::UnknownHousehold, "ranking references a household missing from the census");

    const auto p = static_cast<Eigen::Index>(data.covariate_count());
    design.x.resize(static_cast<Eigen::Index>(design.household_ids.size()), p);
    for (std::size_t i = 0; i < design.household_ids.size(); ++i) {
        const auto& h = data.households[index.at(design.household_ids[i])];
        for (Eigen::Index j = 0; j < p; ++j) design.x(static_cast<Eigen::Index>(i), j) = h.x.at(static_cast<std::size_t>(j));
    }

    design.covariate_names = data.covariate_names;
    design.elite_columns = data.elite_columns;
    design.ranker_ids = data.ranker_ids();
    std::unordered_map<std::string, std::size_t> ranker_index;
    for (std::size_t r = 0; r < design.ranker_ids.size(); ++r) ranker_index.emplace(design.ranker_ids[r], r);

    std::vector<const RankingScheme*> sorted;
    for (const auto& s : data.rankings) sorted.push_back(&s);
    std::sort(sorted.begin(), sorted.end(), [](const RankingScheme* a, const RankingScheme* b) {
        return std::tie(a->community_id, a->ranker_id) < std::tie(b->community_id, b->ranker_id);
    });

    design.gram_by_ranker.assign(design.ranker_ids.size(), Eigen::MatrixXd::Zero(p, p));
    design.appearances.resize(design.household_ids.size());
    for (const auto* s : sorted) {
        Scheme scheme;
        scheme.community_id = s->community_id;
        scheme.ranker = ranker_index.at(s->ranker_id);
        for (const auto& id : s->ordered()) scheme.order.push_back(row_of.at(id));
        const std::size_t scheme_index = design.schemes.size();
        for (std::size_t h = 0; h < scheme.order.size(); ++h) {
            const auto row = scheme.order[h];
            const auto xi = design.x.row(static_cast<Eigen::Index>(row));
            design.gram_by_ranker[scheme.ranker].noalias() += xi.transpose() * xi;
            design.appearances[row].emplace_back(scheme_index, h);
        }
        design.schemes.push_back(std::move(scheme));
    }
    return design;
}

SurveyDesign SurveyDesign::build(const Dataset& data) {
    SurveyDesign survey;
    const auto n = static_cast<Eigen::Index>(data.survey.size());
    const auto p = static_cast<Eigen::Index>(data.covariate_count());
    survey.x.resize(n, p + 1);
    survey.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& h = data.survey[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < p; ++j) survey.x(i, j) = h.x.at(static_cast<std::size_t>(j));
        survey.x(i, p) = 1.0;
        survey.y[i] = h.y.value();
    }
    return survey;
}

LatentState LatentState::initial(const RankedDesign& design, const SurveyDesign* survey) {
    LatentState state;
    state.latent.reserve(design.schemes.size());
    for (const auto& scheme : design.schemes) {
        const auto n = scheme.order.size();
        std::vector<double> values(n);
        for (std::size_t h = 0; h < n; ++h) {
            values[h] = standard_normal_quantile(static_cast<double>(h + 1) / static_cast<double>(n + 1));
        }
        state.latent.push_back(std::move(values));
    }
    const auto p = static_cast<Eigen::Index>(design.covariates());
    state.alpha = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(design.households()));
    state.delta = Eigen::VectorXd::Zero(p);
    state.omega = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(design.rankers()));
    if (survey) {
        state.gamma = Eigen::VectorXd::Zero(survey->x.cols());
        state.mu = Eigen::VectorXd::Zero(survey->x.cols());
    }
    state.sigma_psi_sq = 1.0;
    state.sigma_hyper = 1.0;
    return state;
}

Bounds latent_bounds(std::span<const double> latent, std::size_t h) {
    if (h < 1 || h > latent.size()) throw Error(ErrorCode::InvalidArgument, "rank position out of range");
    return {h == 1 ? -kInf : latent[h - 2], h == latent.size() ? kInf : latent[h]};
}

Bounds latent_bounds(const RankingScheme& scheme, const std::map<std::string, double>& latent, std::size_t h) {
    std::vector<double> in_order;
    for (const auto& id : scheme.ordered()) {
        const auto it = latent.find(id);
        if (it == latent.end()) throw Error(ErrorCode::UnknownHousehold, "no latent value for household '" + id + "'");
        in_order.push_back(it->second);
    }
    return latent_bounds(in_order, h);
}

void sample_latent_sweep(LatentState& state, const RankedDesign& design, RngStream& rng) {
    const Eigen::VectorXd index = linear_index(design, state.delta);
    for (std::size_t s = 0; s < design.schemes.size(); ++s) {
        const auto& scheme = design.schemes[s];
        auto& z = state.latent[s];
        const double variance = 1.0 / state.omega[static_cast<Eigen::Index>(scheme.ranker)];
        const std::size_t n = scheme.order.size();
        for (std::size_t h = 0; h < n; ++h) {
            const auto row = static_cast<Eigen::Index>(scheme.order[h]);
            const double lower = h == 0 ? -kInf : z[h - 1];
            const double upper = h + 1 == n ? kInf : z[h + 1];
            z[h] = sample_truncated_normal(state.alpha[row] + index[row], variance, lower, upper, rng);
        }
    }
}

bool rank_consistent(const LatentState& state, const RankedDesign& design) {
    if (state.latent.size() != design.schemes.size()) return false;
    for (std::size_t s = 0; s < design.schemes.size(); ++s) {
        const auto& z = state.latent[s];
        if (z.size() != design.schemes[s].order.size()) return false;
        for (std::size_t h = 1; h < z.size(); ++h) {
            if (!(z[h - 1] < z[h])) return false;
        }
    }
    return true;
}

DiagonalGaussian alpha_params(const LatentState& state, const RankedDesign& design) {
    const Eigen::VectorXd index = linear_index(design, state.delta);
    const auto n = static_cast<Eigen::Index>(design.households());
    DiagonalGaussian out{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        double precision = 1.0;
        double weighted = 0.0;
        for (const auto& [s, h] : design.appearances[static_cast<std::size_t>(i)]) {
            const double w = state.omega[static_cast<Eigen::Index>(design.schemes[s].ranker)];
            precision += w;
            weighted += w * (state.latent[s][h] - index[i]);
        }
        out.var[i] = 1.0 / precision;
        out.mean[i] = weighted / precision;
    }
    return out;
}

namespace {

Gaussian delta_params_with_precision(const LatentState& state, const RankedDesign& design,
                                     const Eigen::VectorXd& prior_mean, const Eigen::MatrixXd& prior_precision) {
    const auto p = static_cast<Eigen::Index>(design.covariates());
    Eigen::MatrixXd data_precision = Eigen::MatrixXd::Zero(p, p);
    for (std::size_t r = 0; r < design.rankers(); ++r) {
        data_precision += state.omega[static_cast<Eigen::Index>(r)] * design.gram_by_ranker[r];
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
    for (std::size_t s = 0; s < design.schemes.size(); ++s) {
        const auto& scheme = design.schemes[s];
        const double w = state.omega[static_cast<Eigen::Index>(scheme.ranker)];
        for (std::size_t h = 0; h < scheme.order.size(); ++h) {
            const auto row = static_cast<Eigen::Index>(scheme.order[h]);
            rhs.noalias() += (w * (state.latent[s][h] - state.alpha[row])) * design.x.row(row).transpose();
        }
    }
    return conjugate_normal(data_precision, rhs, prior_precision, prior_mean, "delta");
}

Gaussian gamma_params_with_precision(const LatentState& state, const SurveyDesign& survey,
                                     const Eigen::VectorXd& prior_mean, const Eigen::MatrixXd& prior_precision) {
    if (!(state.sigma_psi_sq > 0.0)) throw Error(ErrorCode::InvalidParam, "sigma_psi^2 must be positive");
    const double inv = 1.0 / state.sigma_psi_sq;
    const Eigen::MatrixXd data_precision = inv * (survey.x.transpose() * survey.x);
    const Eigen::VectorXd rhs = inv * (survey.x.transpose() * survey.y);
    return conjugate_normal(data_precision, rhs, prior_precision, prior_mean, "gamma");
}

} // namespace

Gaussian delta_params(const LatentState& state, const RankedDesign& design, const Eigen::VectorXd& prior_mean,
                      const Eigen::MatrixXd& prior_cov) {
    if (prior_mean.size() != static_cast<Eigen::Index>(design.covariates()) || prior_cov.rows() != prior_mean.size()) {
        throw Error(ErrorCode::DimensionMismatch, "delta prior does not match covariate count");
    }
    return delta_params_with_precision(state, design, prior_mean, inverse_spd(prior_cov, "delta prior covariance"));
}

Gaussian gamma_params(const LatentState& state, const SurveyDesign& survey, const Eigen::VectorXd& prior_mean,
                      const Eigen::MatrixXd& prior_cov) {
    if (prior_mean.size() != survey.x.cols() || prior_cov.rows() != prior_mean.size()) {
        throw Error(ErrorCode::DimensionMismatch, "gamma prior does not match survey design");
    }
    return gamma_params_with_precision(state, survey, prior_mean, inverse_spd(prior_cov, "gamma prior covariance"));
}

OmegaProbs omega_probs(const LatentState& state, const RankedDesign& design, std::size_t ranker,
                       const std::array<double, 3>& support, const OmegaProbs& prior) {
    const Eigen::VectorXd index = linear_index(design, state.delta);
    double ss = 0.0;
    double count = 0.0;
    for (std::size_t s = 0; s < design.schemes.size(); ++s) {
        const auto& scheme = design.schemes[s];
        if (scheme.ranker != ranker) continue;
        for (std::size_t h = 0; h < scheme.order.size(); ++h) {
            const auto row = static_cast<Eigen::Index>(scheme.order[h]);
            const double resid = state.latent[s][h] - state.alpha[row] - index[row];
            ss += resid * resid;
            count += 1.0;
        }
    }
    // log a_l + sum_i log N(resid_i | 0, 1/w_l), dropping terms common to all l.
    std::array<double, 3> log_weight{};
    double top = -kInf;
    for (std::size_t l = 0; l < 3; ++l) {
        log_weight[l] = prior[l] > 0.0 ? std::log(prior[l]) + 0.5 * count * std::log(support[l]) - 0.5 * support[l] * ss : -kInf;
        top = std::max(top, log_weight[l]);
    }
    if (!std::isfinite(top)) throw Error(ErrorCode::InvalidProbabilities, "omega prior puts no mass on any support value");
    OmegaProbs out{};
    double total = 0.0;
    for (std::size_t l = 0; l < 3; ++l) {
        out[l] = std::exp(log_weight[l] - top);
        total += out[l];
    }
    for (auto& v : out) v /= total;
    return out;
}

ScaledInvChiSqParams sigma_psi_params(const LatentState& state, const SurveyDesign& survey) {
    const Eigen::VectorXd resid = survey.y - survey.x * state.gamma;
    return {1.0 + static_cast<double>(survey.rows()), resid.squaredNorm() + 1.0};
}

DiagonalGaussian mu_params(const LatentState& state) {
    const auto p = state.delta.size();
    const auto n = state.gamma.size();
    if (state.mu.size() != n || n < p) throw Error(ErrorCode::DimensionMismatch, "mu, gamma and delta sizes are inconsistent");
    const double inv_sigma = 1.0 / state.sigma_hyper;
    DiagonalGaussian out{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index k = 0; k < n; ++k) {
        // Components past delta's length (the survey intercept) see only gamma.
        const bool shared = k < p;
        const double var = 1.0 / ((shared ? 2.0 : 1.0) * inv_sigma + 1.0);
        const double sum = state.gamma[k] + (shared ? state.delta[k] : 0.0);
        out.var[k] = var;
        out.mean[k] = sum * inv_sigma * var;
    }
    return out;
}

ScaledInvChiSqParams sigma_hyper_params(const LatentState& state) {
    const auto p = state.delta.size();
    if (state.mu.size() != state.gamma.size() || state.gamma.size() < p) {
        throw Error(ErrorCode::DimensionMismatch, "mu, gamma and delta sizes are inconsistent");
    }
    const double ss = (state.gamma - state.mu).squaredNorm() + (state.delta - state.mu.head(p)).squaredNorm();
    return {1.0 + static_cast<double>(state.gamma.size() + p), ss + 1.0};
}

double column_quantile(const Eigen::VectorXd& values, double p) {
    if (values.size() == 0) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Eigen::VectorXd PosteriorSamples::delta_mean() const { return delta.colwise().mean().transpose(); }
Eigen::VectorXd PosteriorSamples::alpha_mean() const {
    if (alpha.size() == 0) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(household_ids.size()));
    return alpha.colwise().mean().transpose();
}
Eigen::VectorXd PosteriorSamples::omega_mean() const { return omega.colwise().mean().transpose(); }

std::vector<CoefficientSummary> PosteriorSamples::summarize() const {
    std::vector<CoefficientSummary> out;
    const auto mean = delta_mean();
    const double b = static_cast<double>(draws());
    for (Eigen::Index p = 0; p < delta.cols(); ++p) {
        CoefficientSummary s;
        s.name = covariate_names.at(static_cast<std::size_t>(p));
        s.mean = mean[p];
        const Eigen::VectorXd column = delta.col(p);
        s.sd = b > 1 ? std::sqrt((column.array() - mean[p]).square().sum() / (b - 1.0)) : 0.0;
        s.q025 = column_quantile(column, 0.025);
        s.q975 = column_quantile(column, 0.975);
        out.push_back(std::move(s));
    }
    return out;
}

GibbsKernel::GibbsKernel(const ModelSpec& spec, const RankedDesign& design, const SurveyDesign* survey)
    : spec_(spec), design_(design), aux_(spec.auxiliary ? survey : nullptr) {
    spec_.validate();
    if (spec_.auxiliary && (survey == nullptr || survey->rows() == 0)) {
        throw Error(ErrorCode::InvalidArgument, "auxiliary model requires survey data");
    }
    if (survey && static_cast<std::size_t>(survey->x.cols()) != design.covariates() + 1) {
        throw Error(ErrorCode::DimensionMismatch, "survey covariates do not match ranked covariates");
    }
    if (!spec_.auxiliary) {
        basic_prior_mean_ = spec_.delta_prior_mean(design.covariate_names);
        basic_prior_precision_ = inverse_spd(spec_.delta_prior_cov(design.covariate_names), "delta prior covariance");
    }
    for (const auto& r : design.ranker_ids) omega_priors_.push_back(spec_.omega_prior_for(r));
}

LatentState GibbsKernel::initial_state() const { return LatentState::initial(design_, aux_); }

void GibbsKernel::step(LatentState& state, RngStream& rng) const {
    const auto& design = design_;
    const auto* aux = aux_;
    const auto p = static_cast<Eigen::Index>(design.covariates());
    // 1. latent utilities
    sample_latent_sweep(state, design, rng);
    // 2. household effects
    if (spec_.multi_ranker) {
        const auto a = alpha_params(state, design);
        for (Eigen::Index i = 0; i < a.mean.size(); ++i) state.alpha[i] = a.mean[i] + std::sqrt(a.var[i]) * rng.normal();
    }
    // 3. delta
    if (aux) {
        const Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(p, p) / state.sigma_hyper;
        const auto d = delta_params_with_precision(state, design, state.mu.head(p), precision);
        state.delta = sample_mvn(d.mean, d.cov, rng);
    } else {
        const auto d = delta_params_with_precision(state, design, basic_prior_mean_, basic_prior_precision_);
        state.delta = sample_mvn(d.mean, d.cov, rng);
    }
    // 4. gamma
    if (aux) {
        const auto n = aux->x.cols();
        const Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(n, n) / state.sigma_hyper;
        const auto g = gamma_params_with_precision(state, *aux, state.mu, precision);
        state.gamma = sample_mvn(g.mean, g.cov, rng);
    }
    // 5. ranker precisions
    if (spec_.multi_ranker) {
        for (std::size_t r = 0; r < design.rankers(); ++r) {
            const auto probs = omega_probs(state, design, r, spec_.omega_support, omega_priors_[r]);
            state.omega[static_cast<Eigen::Index>(r)] = spec_.omega_support[sample_multinomial_index(probs, rng)];
        }
    }
    if (aux) {
        // 6. survey noise variance
        const auto s = sigma_psi_params(state, *aux);
        state.sigma_psi_sq = sample_scaled_inv_chisq(s.df, s.scale_sum, rng);
        // 7. shared prior mean
        const auto m = mu_params(state);
        for (Eigen::Index k = 0; k < m.mean.size(); ++k) state.mu[k] = m.mean[k] + std::sqrt(m.var[k]) * rng.normal();
        // 8. shared prior variance
        const auto h = sigma_hyper_params(state);
        state.sigma_hyper = sample_scaled_inv_chisq(h.df, h.scale_sum, rng);
    }
}

PosteriorSamples run_gibbs(const ModelSpec& spec, const RankedDesign& design, const SurveyDesign* survey,
                           const McmcConfig& cfg, RngStream& rng) {
    cfg.validate();
    const GibbsKernel kernel(spec, design, survey);
    const SurveyDesign* aux = spec.auxiliary ? survey : nullptr;

    const auto p = static_cast<Eigen::Index>(design.covariates());

    LatentState state = kernel.initial_state();
    if (!rank_consistent(state, design)) throw Error(ErrorCode::Internal, "initial latent values violate the rankings");

    const auto retained = static_cast<Eigen::Index>(cfg.retained());
    PosteriorSamples out;
    out.spec = spec;
    out.config = cfg;
    out.covariate_names = design.covariate_names;
    out.elite_columns = design.elite_columns;
    out.ranker_ids = design.ranker_ids;
    out.household_ids = design.household_ids;
    out.household_community = design.household_community;
    out.household_x = design.x;
    out.delta.resize(retained, p);
    out.omega.resize(retained, static_cast<Eigen::Index>(design.rankers()));
    if (spec.multi_ranker) out.alpha.resize(retained, static_cast<Eigen::Index>(design.households()));
    if (aux) {
        out.gamma.resize(retained, aux->x.cols());
        out.mu.resize(retained, aux->x.cols());
        out.sigma_psi_sq.resize(retained);
        out.sigma_hyper.resize(retained);
    }

    for (int iter = 0; iter < cfg.total_iterations; ++iter) {
        kernel.step(state, rng);

        if (cfg.check_rank_consistency && !rank_consistent(state, design)) {
            throw Error(ErrorCode::Internal, "rank consistency violated at iteration " + std::to_string(iter));
        }
        if (iter < cfg.burn_in) continue;

        const auto b = static_cast<Eigen::Index>(iter - cfg.burn_in);
        if (!state.delta.allFinite() || !state.alpha.allFinite() || (aux && (!state.gamma.allFinite() || !state.mu.allFinite() ||
                                                                             !std::isfinite(state.sigma_psi_sq) ||
                                                                             !std::isfinite(state.sigma_hyper)))) {
            throw Error(ErrorCode::DivergentChain, "non-finite draw at iteration " + std::to_string(iter));
        }
        out.delta.row(b) = state.delta.transpose();
        out.omega.row(b) = state.omega.transpose();
        if (spec.multi_ranker) out.alpha.row(b) = state.alpha.transpose();
        if (aux) {
            out.gamma.row(b) = state.gamma.transpose();
            out.mu.row(b) = state.mu.transpose();
            out.sigma_psi_sq[b] = state.sigma_psi_sq;
            out.sigma_hyper[b] = state.sigma_hyper;
        }
        if (cfg.retain_latent) out.latent.push_back(state.latent);
    }
    return out;
}

PosteriorSamples fit(const ModelSpec& spec, const Dataset& data, const McmcConfig& cfg, RngStream& rng) {
    const auto design = RankedDesign::build(data);
    if (spec.auxiliary) {
        if (data.survey.empty()) throw Error(ErrorCode::InvalidArgument, "auxiliary model requires survey data");
        const auto survey = SurveyDesign::build(data);
        return run_gibbs(spec, design, &survey, cfg, rng);
    }
    return run_gibbs(spec, design, nullptr, cfg, rng);
}

} // namespace ht
