#include "hybridtarget/baselines.hpp"

#include "hybridtarget/error.hpp"

#include <cmath>
#include <numbers>

namespace ht {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double log_norm_cdf(double z) {
    if (z > -30.0) return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
    // asymptotic expansion of the lower tail
    const double z2 = z * z;
    return -0.5 * z2 - std::log(-z) - kLogSqrt2Pi + std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

/// phi(z) / Phi(z), accurate far into the lower tail.
double inverse_mills(double z) {
    if (z > -30.0) {
        const double pdf = std::exp(-0.5 * z * z - kLogSqrt2Pi);
        return pdf / (0.5 * std::erfc(-z / std::numbers::sqrt2));
    }
    const double z2 = z * z;
    return -z / (1.0 - 1.0 / z2 + 3.0 / (z2 * z2));
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out(x.rows(), x.cols() + 1);
    out.col(0).setOnes();
    out.rightCols(x.cols()) = x;
    return out;
}

} // namespace

std::map<std::string, int> dichotomize(const RankingScheme& scheme, int quota) {
    if (quota < 1 || static_cast<std::size_t>(quota) > scheme.size()) {
        throw Error(ErrorCode::InvalidQuota, "quota " + std::to_string(quota) + " outside [1, " +
                                                 std::to_string(scheme.size()) + "] for community " +
                                                 scheme.community_id);
    }
    std::map<std::string, int> out;
    for (const auto& [id, rank] : scheme.ranks) out[id] = rank <= quota ? 1 : 0;
    return out;
}

Eigen::VectorXd ProbitFit::linear_index(const Eigen::MatrixXd& x) const {
    if (x.cols() + 1 != beta.size()) throw Error(ErrorCode::DimensionMismatch, "covariate count differs from fit");
    return x * beta.tail(beta.size() - 1);
}

double probit_log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXi& d, const Eigen::VectorXd& beta) {
    if (x.rows() != d.size() || x.cols() + 1 != beta.size()) throw Error(ErrorCode::DimensionMismatch, "probit dimensions");
    double ll = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double eta = beta[0] + x.row(i).dot(beta.tail(beta.size() - 1));
        ll += log_norm_cdf(d[i] == 1 ? eta : -eta);
    }
    return ll;
}

ProbitFit fit_probit_mle(const Eigen::MatrixXd& x, const Eigen::VectorXi& d) {
    if (x.rows() != d.size()) throw Error(ErrorCode::DimensionMismatch, "X and d have different row counts");
    if (x.rows() <= x.cols()) throw Error(ErrorCode::InvalidArgument, "probit needs more rows than covariates");
    Eigen::Index ones = 0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (d[i] != 0 && d[i] != 1) throw Error(ErrorCode::InvalidArgument, "outcomes must be 0 or 1");
        ones += d[i];
    }
    if (ones == 0 || ones == d.size()) throw Error(ErrorCode::AllSameOutcome, "all outcomes are identical");

    const Eigen::MatrixXd xa = with_intercept(x);
    const Eigen::Index p = xa.cols();
    ProbitFit fit;
    fit.beta = Eigen::VectorXd::Zero(p);
    fit.log_likelihood = probit_log_likelihood(x, d, fit.beta);

    for (fit.iterations = 0; fit.iterations < kProbitMaxIterations; ++fit.iterations) {
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(p);
        Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p, p);
        for (Eigen::Index i = 0; i < xa.rows(); ++i) {
            const double sign = d[i] == 1 ? 1.0 : -1.0;
            const double eta = xa.row(i).dot(fit.beta);
            const double lambda = sign * inverse_mills(sign * eta);
            grad += lambda * xa.row(i).transpose();
            info += (lambda * (lambda + eta)) * xa.row(i).transpose() * xa.row(i);
        }
        if (grad.lpNorm<Eigen::Infinity>() < kProbitGradientTolerance) {
            fit.converged = true;
            break;
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        Eigen::VectorXd step;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-14) {
            step = ldlt.solve(grad);
        } else {
            step = grad; // information is numerically singular; fall back to gradient ascent
        }
        double scale = 1.0;
        bool improved = false;
        for (int halving = 0; halving < 40; ++halving) {
            Eigen::VectorXd candidate = fit.beta + scale * step;
            const double ll = probit_log_likelihood(x, d, candidate);
            if (std::isfinite(ll) && ll >= fit.log_likelihood) {
                fit.beta = candidate;
                improved = ll - fit.log_likelihood > 0.0 || scale == 1.0;
                fit.log_likelihood = ll;
                break;
            }
            scale *= 0.5;
        }
        if (fit.beta.lpNorm<Eigen::Infinity>() > kSeparationCoefficient) break;
        if (!improved) {
            fit.converged = grad.lpNorm<Eigen::Infinity>() < 1e-5;
            break;
        }
    }
    if (fit.beta.lpNorm<Eigen::Infinity>() > kSeparationCoefficient || fit.log_likelihood > -1e-6) {
        fit.separation_detected = true;
        fit.converged = false;
    }
    return fit;
}

Eigen::VectorXd PmtFit::predict(const Eigen::MatrixXd& x) const {
    if (x.cols() + 1 != coefficients.size()) throw Error(ErrorCode::DimensionMismatch, "covariate count differs from fit");
    return (x * coefficients.tail(coefficients.size() - 1)).array() + coefficients[0];
}

PmtFit fit_pmt_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (x.rows() != y.size()) throw Error(ErrorCode::DimensionMismatch, "X and y have different row counts");
    if (x.rows() <= x.cols() + 1) throw Error(ErrorCode::InvalidArgument, "OLS needs more rows than parameters");
    const Eigen::MatrixXd xa = with_intercept(x);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xa);
    if (qr.rank() < xa.cols()) throw Error(ErrorCode::RankDeficient, "design matrix is rank deficient");
    PmtFit fit;
    fit.coefficients = qr.solve(y);
    const Eigen::VectorXd resid = y - xa * fit.coefficients;
    fit.residual_variance = resid.squaredNorm() / static_cast<double>(xa.rows() - xa.cols());
    return fit;
}

} // namespace ht
