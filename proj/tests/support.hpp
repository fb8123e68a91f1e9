#pragma once

// Shared fixtures and brute-force oracles for the unit and acceptance tests.
// The oracles rebuild the stacked design matrices explicitly and invert with
// full-pivot LU, so they share no code path with the library's LLT solves.

#include "hybridtarget/data.hpp"
#include "hybridtarget/error.hpp"
#include "hybridtarget/gibbs.hpp"
#include "hybridtarget/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace testing {

/// Code of the ht::Error thrown by f, or Ok when it returns normally.
template <class F>
ht::ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const ht::Error& e) {
        return e.code();
    }
    return ht::ErrorCode::Ok;
}

/// Fresh directory under the system temp dir, removed and recreated per call.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("hybridtarget_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::filesystem::path write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream(path) << content;
    return path;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string pad(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%03d", prefix, i);
    return buf;
}

/// Random dataset: community sizes drawn from [min_size, max_size], every
/// ranker ranks every community with a uniform random permutation.
inline ht::Dataset random_dataset(ht::RngStream& rng, int communities, int min_size, int max_size, int p, int rankers,
                                  int survey_rows = 0) {
    ht::Dataset data;
    for (int j = 0; j < p; ++j) data.covariate_names.push_back("x" + std::to_string(j + 1));
    for (int k = 0; k < communities; ++k) {
        const int n = min_size + static_cast<int>(rng() % static_cast<std::uint64_t>(max_size - min_size + 1));
        std::vector<std::string> ids;
        for (int i = 0; i < n; ++i) {
            ht::Household h;
            h.id = pad("c", k) + "_" + pad("h", i);
            h.community_id = pad("c", k);
            for (int j = 0; j < p; ++j) h.x.push_back(rng.normal());
            ids.push_back(h.id);
            data.households.push_back(h);
        }
        for (int r = 0; r < rankers; ++r) {
            std::vector<int> perm(static_cast<std::size_t>(n));
            std::iota(perm.begin(), perm.end(), 1);
            for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng() % i]);
            ht::RankingScheme s;
            s.community_id = pad("c", k);
            s.ranker_id = "r" + std::to_string(r + 1);
            for (int i = 0; i < n; ++i) s.ranks[ids[static_cast<std::size_t>(i)]] = perm[static_cast<std::size_t>(i)];
            data.rankings.push_back(s);
        }
    }
    for (int m = 0; m < survey_rows; ++m) {
        ht::Household h;
        h.id = pad("s", m);
        h.community_id = "survey";
        for (int j = 0; j < p; ++j) h.x.push_back(rng.normal());
        h.y = rng.normal();
        data.survey.push_back(h);
    }
    return data;
}

/// Rank-consistent random state: sorted normals for each scheme and random
/// values for every other block.
inline ht::LatentState random_state(const ht::RankedDesign& design, const ht::SurveyDesign* survey, ht::RngStream& rng,
                                    double omega_scale = 1.0) {
    auto state = ht::LatentState::initial(design, survey);
    for (auto& z : state.latent) {
        for (auto& v : z) v = 2.0 * rng.normal();
        std::sort(z.begin(), z.end());
    }
    for (Eigen::Index i = 0; i < state.alpha.size(); ++i) state.alpha[i] = rng.normal();
    for (Eigen::Index i = 0; i < state.delta.size(); ++i) state.delta[i] = rng.normal();
    const double support[3] = {0.5, 1.0, 2.0};
    for (Eigen::Index r = 0; r < state.omega.size(); ++r) state.omega[r] = omega_scale * support[rng() % 3];
    for (Eigen::Index i = 0; i < state.gamma.size(); ++i) state.gamma[i] = rng.normal();
    for (Eigen::Index i = 0; i < state.mu.size(); ++i) state.mu[i] = rng.normal();
    state.sigma_psi_sq = 0.2 + rng.exponential();
    state.sigma_hyper = 0.2 + rng.exponential();
    return state;
}

/// Stacked observation layout: one row per (scheme, position).
struct Stacked {
    Eigen::MatrixXd xk;       // covariates per observation
    Eigen::MatrixXd xr;       // household incidence (observation x household)
    Eigen::VectorXd z;        // latent values
    Eigen::VectorXd omega;    // precision per observation
    std::vector<std::size_t> ranker;
};

inline Stacked stack(const ht::LatentState& state, const ht::RankedDesign& design) {
    const auto n_obs = static_cast<Eigen::Index>(design.observations());
    Stacked s;
    s.xk = Eigen::MatrixXd::Zero(n_obs, design.x.cols());
    s.xr = Eigen::MatrixXd::Zero(n_obs, static_cast<Eigen::Index>(design.households()));
    s.z.resize(n_obs);
    s.omega.resize(n_obs);
    Eigen::Index row = 0;
    for (std::size_t k = 0; k < design.schemes.size(); ++k) {
        const auto& scheme = design.schemes[k];
        for (std::size_t h = 0; h < scheme.order.size(); ++h, ++row) {
            const auto i = static_cast<Eigen::Index>(scheme.order[h]);
            s.xk.row(row) = design.x.row(i);
            s.xr(row, i) = 1.0;
            s.z[row] = state.latent[k][h];
            s.omega[row] = state.omega[static_cast<Eigen::Index>(scheme.ranker)];
            s.ranker.push_back(scheme.ranker);
        }
    }
    return s;
}

inline Eigen::MatrixXd lu_inverse(const Eigen::MatrixXd& m) { return m.fullPivLu().inverse(); }

/// V = (X_R' Omega X_R + I)^-1, m = V X_R' Omega (z - X_K delta)
inline ht::Gaussian oracle_alpha(const ht::LatentState& state, const ht::RankedDesign& design) {
    const auto s = stack(state, design);
    const Eigen::MatrixXd w = s.omega.asDiagonal();
    const auto n = s.xr.cols();
    ht::Gaussian out;
    out.cov = lu_inverse(s.xr.transpose() * w * s.xr + Eigen::MatrixXd::Identity(n, n));
    out.mean = out.cov * (s.xr.transpose() * w * (s.z - s.xk * state.delta));
    return out;
}

/// V = (X_K' Omega X_K + S^-1)^-1, m = V (X_K' Omega (z - X_R alpha) + S^-1 m0)
inline ht::Gaussian oracle_delta(const ht::LatentState& state, const ht::RankedDesign& design, const Eigen::VectorXd& m0,
                                 const Eigen::MatrixXd& s0) {
    const auto s = stack(state, design);
    const Eigen::MatrixXd w = s.omega.asDiagonal();
    const Eigen::MatrixXd s0_inv = lu_inverse(s0);
    ht::Gaussian out;
    out.cov = lu_inverse(s.xk.transpose() * w * s.xk + s0_inv);
    out.mean = out.cov * (s.xk.transpose() * w * (s.z - s.xr * state.alpha) + s0_inv * m0);
    return out;
}

inline ht::Gaussian oracle_gamma(const ht::LatentState& state, const ht::SurveyDesign& survey, const Eigen::VectorXd& m0,
                                 const Eigen::MatrixXd& s0) {
    const Eigen::MatrixXd s0_inv = lu_inverse(s0);
    const double inv = 1.0 / state.sigma_psi_sq;
    ht::Gaussian out;
    out.cov = lu_inverse(survey.x.transpose() * (inv * Eigen::MatrixXd::Identity(survey.x.rows(), survey.x.rows())) * survey.x + s0_inv);
    out.mean = out.cov * (survey.x.transpose() * (inv * survey.y) + s0_inv * m0);
    return out;
}

/// Posterior over the three support values from explicit normal densities.
inline std::array<double, 3> oracle_omega(const ht::LatentState& state, const ht::RankedDesign& design, std::size_t ranker,
                                          const std::array<double, 3>& support, const std::array<double, 3>& prior) {
    const auto s = stack(state, design);
    const Eigen::VectorXd resid = s.z - s.xr * state.alpha - s.xk * state.delta;
    std::array<long double, 3> logp{};
    for (std::size_t l = 0; l < 3; ++l) {
        long double acc = prior[l] > 0 ? std::log(static_cast<long double>(prior[l])) : -INFINITY;
        for (Eigen::Index i = 0; i < resid.size(); ++i) {
            if (s.ranker[static_cast<std::size_t>(i)] != ranker) continue;
            const long double var = 1.0L / support[l];
            acc += -0.5L * std::log(2.0L * 3.14159265358979323846L * var) - 0.5L * resid[i] * resid[i] / var;
        }
        logp[l] = acc;
    }
    const long double top = std::max({logp[0], logp[1], logp[2]});
    long double total = 0;
    for (auto& v : logp) total += (v = std::exp(v - top));
    return {static_cast<double>(logp[0] / total), static_cast<double>(logp[1] / total), static_cast<double>(logp[2] / total)};
}

/// Dense (2 Sigma^-1 + I)^-1 for the shared components, (Sigma^-1 + I)^-1 for
/// the survey-only intercept.
inline ht::Gaussian oracle_mu(const ht::LatentState& state) {
    const auto n = state.gamma.size();
    const auto p = state.delta.size();
    Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    const Eigen::MatrixXd sigma_inv = Eigen::MatrixXd::Identity(n, n) / state.sigma_hyper;
    Eigen::VectorXd delta_full = Eigen::VectorXd::Zero(n);
    delta_full.head(p) = state.delta;
    Eigen::MatrixXd delta_mask = Eigen::MatrixXd::Zero(n, n);
    delta_mask.topLeftCorner(p, p).setIdentity();
    precision += sigma_inv + delta_mask * sigma_inv;
    rhs = sigma_inv * state.gamma + delta_mask * sigma_inv * delta_full;
    ht::Gaussian out;
    out.cov = lu_inverse(precision);
    out.mean = out.cov * rhs;
    return out;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

inline double max_rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) worst = std::max(worst, rel_err(a(i, j), b(i, j)));
    }
    return worst;
}

/// One random conditional-posterior instance: design, survey and state.
struct Instance {
    ht::Dataset data;
    ht::RankedDesign design;
    ht::SurveyDesign survey;
    ht::LatentState state;
};

inline Instance random_instance(ht::RngStream& rng) {
    Instance inst;
    const int p = 1 + static_cast<int>(rng() % 4);
    const int communities = 1 + static_cast<int>(rng() % 4);
    const int rankers = 1 + static_cast<int>(rng() % 3);
    const int survey_rows = p + 3 + static_cast<int>(rng() % 8);
    inst.data = random_dataset(rng, communities, 1, 6, p, rankers, survey_rows);
    inst.design = ht::RankedDesign::build(inst.data);
    inst.survey = ht::SurveyDesign::build(inst.data);
    inst.state = random_state(inst.design, &inst.survey, rng);
    return inst;
}

/// Worst relative error of every *_params operation against its oracle over
/// `cases` random instances.
struct OracleReport {
    double alpha = 0, delta = 0, gamma = 0, omega = 0, sigma_psi = 0, mu = 0, sigma_hyper = 0;
    double worst() const { return std::max({alpha, delta, gamma, omega, sigma_psi, mu, sigma_hyper}); }
};

inline OracleReport run_oracle_suite(int cases, std::uint64_t seed) {
    ht::RngStream rng(seed, 7);
    OracleReport rep;
    for (int c = 0; c < cases; ++c) {
        auto inst = random_instance(rng);
        const auto& st = inst.state;

        const auto a = ht::alpha_params(st, inst.design);
        const auto ao = oracle_alpha(st, inst.design);
        Eigen::MatrixXd a_cov = a.var.asDiagonal();
        rep.alpha = std::max({rep.alpha, max_rel_err(a.mean, ao.mean), max_rel_err(a_cov, ao.cov)});

        const auto p = inst.design.x.cols();
        Eigen::VectorXd m0(p);
        for (Eigen::Index i = 0; i < p; ++i) m0[i] = rng.normal();
        Eigen::MatrixXd l = Eigen::MatrixXd::Random(p, p);
        const Eigen::MatrixXd s0 = l * l.transpose() + 0.5 * Eigen::MatrixXd::Identity(p, p);
        const auto d = ht::delta_params(st, inst.design, m0, s0);
        const auto dor = oracle_delta(st, inst.design, m0, s0);
        rep.delta = std::max({rep.delta, max_rel_err(d.mean, dor.mean), max_rel_err(d.cov, dor.cov)});

        const auto q = inst.survey.x.cols();
        Eigen::VectorXd g0(q);
        for (Eigen::Index i = 0; i < q; ++i) g0[i] = rng.normal();
        const Eigen::MatrixXd gs0 = (0.5 + rng.exponential()) * Eigen::MatrixXd::Identity(q, q);
        const auto g = ht::gamma_params(st, inst.survey, g0, gs0);
        const auto go = oracle_gamma(st, inst.survey, g0, gs0);
        rep.gamma = std::max({rep.gamma, max_rel_err(g.mean, go.mean), max_rel_err(g.cov, go.cov)});

        for (std::size_t r = 0; r < inst.design.rankers(); ++r) {
            std::array<double, 3> prior{rng.uniform(), rng.uniform(), rng.uniform()};
            const double sum = prior[0] + prior[1] + prior[2];
            for (auto& v : prior) v /= sum;
            const std::array<double, 3> support{0.5, 1.0, 2.0};
            const auto w = ht::omega_probs(st, inst.design, r, support, prior);
            const auto wo = oracle_omega(st, inst.design, r, support, prior);
            for (std::size_t k = 0; k < 3; ++k) rep.omega = std::max(rep.omega, rel_err(w[k], wo[k]));
        }

        const auto sp = ht::sigma_psi_params(st, inst.survey);
        double rss = 0.0;
        for (Eigen::Index i = 0; i < inst.survey.y.size(); ++i) {
            double fit = 0.0;
            for (Eigen::Index j = 0; j < q; ++j) fit += inst.survey.x(i, j) * st.gamma[j];
            rss += (inst.survey.y[i] - fit) * (inst.survey.y[i] - fit);
        }
        rep.sigma_psi = std::max({rep.sigma_psi, rel_err(sp.df, 1.0 + static_cast<double>(inst.survey.y.size())),
                                  rel_err(sp.scale_sum, rss + 1.0)});

        const auto mu = ht::mu_params(st);
        const auto muo = oracle_mu(st);
        Eigen::MatrixXd mu_cov = mu.var.asDiagonal();
        rep.mu = std::max({rep.mu, max_rel_err(mu.mean, muo.mean), max_rel_err(mu_cov, muo.cov)});

        const auto sh = ht::sigma_hyper_params(st);
        double ss = 1.0;
        for (Eigen::Index i = 0; i < q; ++i) ss += (st.gamma[i] - st.mu[i]) * (st.gamma[i] - st.mu[i]);
        for (Eigen::Index i = 0; i < p; ++i) ss += (st.delta[i] - st.mu[i]) * (st.delta[i] - st.mu[i]);
        rep.sigma_hyper = std::max({rep.sigma_hyper, rel_err(sh.df, 1.0 + static_cast<double>(p + q)), rel_err(sh.scale_sum, ss)});
    }
    return rep;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// CDF of N(mean, var) truncated to (lo, hi), evaluated through whichever
/// tail keeps the subtraction well conditioned.
inline double truncated_normal_cdf(double x, double mean, double var, double lo, double hi) {
    const double sd = std::sqrt(var);
    const double a = (lo - mean) / sd, b = (hi - mean) / sd, t = (x - mean) / sd;
    if (a > 0.0) {
        auto q = [](double u) { return std::isinf(u) ? 0.0 : 0.5 * std::erfc(u / std::sqrt(2.0)); };
        return (q(a) - q(t)) / (q(a) - q(b));
    }
    auto phi = [](double u) { return std::isinf(u) ? (u > 0 ? 1.0 : 0.0) : normal_cdf(u); };
    if (b < 0.0) return (phi(t) - phi(a)) / (phi(b) - phi(a));
    return (phi(t) - phi(a)) / (phi(b) - phi(a));
}

/// Kolmogorov-Smirnov statistic of samples against a continuous CDF.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

/// Asymptotic critical value of the one-sample KS statistic.
inline double ks_critical(double alpha, std::size_t n) {
    return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

struct TnCase {
    double mean, var, lo, hi;
};

/// The 20 truncated-normal cases: fixed tail cases plus seeded random ones.
inline std::vector<TnCase> tn_cases() {
    const double inf = INFINITY;
    std::vector<TnCase> cases{
        {0, 1, -inf, inf}, {0, 1, 0, inf},   {0, 1, 5, inf},      {0, 1, 8, inf},   {0, 1, -inf, -6},
        {1, 4, 12, inf},   {0, 1, 5.5, 6},   {0, 1, -1, 1},       {3, 0.25, -inf, 0}, {0, 1, 2, 2.0001},
        {-2, 9, -1, 4},    {0, 1, -0.1, 0.1}, {10, 1, -inf, 2},   {0, 0.01, 0.5, inf},
    };
    ht::RngStream rng(2024, 3);
    while (cases.size() < 20) {
        const double m = 3.0 * rng.normal();
        const double v = 0.1 + 3.0 * rng.uniform();
        const double lo = 4.0 * rng.normal();
        const double hi = rng.uniform() < 0.3 ? inf : lo + 0.05 + 3.0 * rng.uniform();
        cases.push_back({m, v, lo, hi});
    }
    return cases;
}

} // namespace testing
