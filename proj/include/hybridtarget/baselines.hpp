#pragma once

#include "hybridtarget/data.hpp"

#include <Eigen/Dense>

#include <map>
#include <string>

namespace ht {

/// 1 for the q lowest-ranked (most needy) households, 0 otherwise.
std::map<std::string, int> dichotomize(const RankingScheme& scheme, int quota);

struct ProbitFit {
    Eigen::VectorXd beta; // intercept first, then one slope per column of X
    bool converged = false;
    bool separation_detected = false;
    int iterations = 0;
    double log_likelihood = 0.0;

    /// Linear index x * slopes (intercept omitted; it does not change rankings).
    Eigen::VectorXd linear_index(const Eigen::MatrixXd& x) const;
};

inline constexpr int kProbitMaxIterations = 50;
inline constexpr double kProbitGradientTolerance = 1e-8;
inline constexpr double kSeparationCoefficient = 1e3;

/// Probit log-likelihood with an implicit intercept column.
double probit_log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXi& d, const Eigen::VectorXd& beta);

/// Newton-Raphson maximum likelihood with step halving. Fits that run into
/// separation are returned with the flag set rather than rejected.
ProbitFit fit_probit_mle(const Eigen::MatrixXd& x, const Eigen::VectorXi& d);

struct PmtFit {
    Eigen::VectorXd coefficients; // intercept first
    double residual_variance = 0.0;

    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

PmtFit fit_pmt_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

} // namespace ht
