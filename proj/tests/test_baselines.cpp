#include "hybridtarget/baselines.hpp"
#include "support.hpp"

#include <doctest.h>

using ht::ErrorCode;
using testing::code_of;

namespace {

double oracle_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXi& d, const Eigen::VectorXd& beta) {
    double ll = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double eta = beta[0];
        for (Eigen::Index j = 0; j < x.cols(); ++j) eta += x(i, j) * beta[j + 1];
        const double p = 0.5 * std::erfc(-(d[i] ? eta : -eta) / std::sqrt(2.0));
        ll += std::log(p);
    }
    return ll;
}

Eigen::VectorXd oracle_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXi& d, const Eigen::VectorXd& beta) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(beta.size());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double eta = beta[0];
        for (Eigen::Index j = 0; j < x.cols(); ++j) eta += x(i, j) * beta[j + 1];
        const double s = d[i] ? 1.0 : -1.0;
        const double pdf = std::exp(-0.5 * eta * eta) / std::sqrt(2.0 * 3.141592653589793);
        const double w = s * pdf / (0.5 * std::erfc(-s * eta / std::sqrt(2.0)));
        g[0] += w;
        for (Eigen::Index j = 0; j < x.cols(); ++j) g[j + 1] += w * x(i, j);
    }
    return g;
}

/// Derivative-free Nelder-Mead maximization with restarts.
Eigen::VectorXd nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd start) {
    const auto n = start.size();
    for (int restart = 0; restart < 8; ++restart) {
        std::vector<Eigen::VectorXd> pts{start};
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd p = start;
            p[i] += restart == 0 ? 0.5 : 0.05;
            pts.push_back(p);
        }
        std::vector<double> val;
        for (const auto& p : pts) val.push_back(-f(p));
        for (int iter = 0; iter < 20000; ++iter) {
            std::vector<std::size_t> order(pts.size());
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
            std::vector<Eigen::VectorXd> p2;
            std::vector<double> v2;
            for (auto i : order) p2.push_back(pts[i]), v2.push_back(val[i]);
            pts = p2, val = v2;
            if (val.back() - val.front() < 1e-15 && (pts.back() - pts.front()).norm() < 1e-10) break;
            Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
            for (Eigen::Index i = 0; i < n; ++i) c += pts[static_cast<std::size_t>(i)];
            c /= static_cast<double>(n);
            const Eigen::VectorXd r = c + (c - pts.back());
            const double fr = -f(r);
            if (fr < val.front()) {
                const Eigen::VectorXd e = c + 2.0 * (c - pts.back());
                const double fe = -f(e);
                if (fe < fr) pts.back() = e, val.back() = fe;
                else pts.back() = r, val.back() = fr;
            } else if (fr < val[val.size() - 2]) {
                pts.back() = r, val.back() = fr;
            } else {
                const Eigen::VectorXd k = c + 0.5 * (pts.back() - c);
                const double fk = -f(k);
                if (fk < val.back()) {
                    pts.back() = k, val.back() = fk;
                } else {
                    for (std::size_t i = 1; i < pts.size(); ++i) {
                        pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
                        val[i] = -f(pts[i]);
                    }
                }
            }
        }
        start = pts.front();
    }
    return start;
}

} // namespace

TEST_CASE("dichotomize examples") {
    ht::RankingScheme s;
    s.community_id = "c1";
    for (int i = 1; i <= 5; ++i) s.ranks["h" + std::to_string(i)] = i;
    const auto two = ht::dichotomize(s, 2);
    CHECK(two.at("h1") == 1);
    CHECK(two.at("h2") == 1);
    CHECK(two.at("h3") == 0);
    CHECK(two.at("h4") == 0);
    CHECK(two.at("h5") == 0);
    for (const auto& [id, v] : ht::dichotomize(s, 5)) CHECK(v == 1);
    const auto one = ht::dichotomize(s, 1);
    int total = 0;
    for (const auto& [id, v] : one) total += v;
    CHECK(total == 1);
    CHECK(one.at("h1") == 1);
    CHECK(code_of([&] { ht::dichotomize(s, 0); }) == ErrorCode::InvalidQuota);
    CHECK(code_of([&] { ht::dichotomize(s, 6); }) == ErrorCode::InvalidQuota);
}

TEST_CASE("probit examples") {
    Eigen::MatrixXd none(4, 0);
    Eigen::VectorXi half(4);
    half << 0, 1, 0, 1;
    const auto intercept = ht::fit_probit_mle(none, half);
    CHECK(intercept.converged);
    CHECK(std::abs(intercept.beta[0]) < 1e-10);

    Eigen::MatrixXd sep(2, 1);
    sep << 0, 1;
    Eigen::VectorXi d(2);
    d << 0, 1;
    const auto s = ht::fit_probit_mle(sep, d);
    CHECK(s.separation_detected);
    CHECK(s.iterations <= ht::kProbitMaxIterations);

    Eigen::VectorXi same = Eigen::VectorXi::Ones(4);
    CHECK(code_of([&] { ht::fit_probit_mle(none, same); }) == ErrorCode::AllSameOutcome);
}

TEST_CASE("probit matches a derivative-free optimizer") {
    ht::RngStream rng(7, 0);
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 200;
        Eigen::MatrixXd x(n, 2);
        Eigen::VectorXi d(n);
        for (int i = 0; i < n; ++i) {
            x(i, 0) = rng.normal();
            x(i, 1) = rng.uniform() < 0.5 ? 1.0 : 0.0;
            const double latent = 0.3 + 0.8 * x(i, 0) - 0.6 * x(i, 1) + rng.normal();
            d[i] = latent > 0 ? 1 : 0;
        }
        const auto fit = ht::fit_probit_mle(x, d);
        REQUIRE(fit.converged);
        CHECK_FALSE(fit.separation_detected);
        CHECK(oracle_gradient(x, d, fit.beta).norm() < 1e-8);
        CHECK(std::abs(fit.log_likelihood - oracle_loglik(x, d, fit.beta)) < 1e-9);
        const auto best = nelder_mead([&](const Eigen::VectorXd& b) { return oracle_loglik(x, d, b); }, Eigen::VectorXd::Zero(3));
        INFO("newton " << fit.beta.transpose() << " vs simplex " << best.transpose());
        CHECK((fit.beta - best).cwiseAbs().maxCoeff() < 1e-4);

        Eigen::MatrixXd shifted = x.array() + 3.0;
        const auto moved = ht::fit_probit_mle(shifted, d);
        CHECK((moved.beta.tail(2) - fit.beta.tail(2)).cwiseAbs().maxCoeff() < 1e-6);
        CHECK(std::abs(moved.beta[0] - (fit.beta[0] - 3.0 * fit.beta.tail(2).sum())) < 1e-6);
        CHECK(fit.linear_index(x).isApprox(x * fit.beta.tail(2)));
    }
}

TEST_CASE("PMT examples") {
    Eigen::MatrixXd x(4, 1);
    x << 1, 2, 3, 4;
    Eigen::VectorXd y = 2.0 * x.col(0);
    const auto exact = ht::fit_pmt_ols(x, y);
    CHECK(exact.coefficients[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::abs(exact.coefficients[0]) < 1e-12);
    CHECK(exact.residual_variance < 1e-20);

    Eigen::MatrixXd xo(4, 1);
    xo << -1, 1, -1, 1;
    Eigen::VectorXd yo(4);
    yo << 1, 1, -1, -1;
    CHECK(std::abs(ht::fit_pmt_ols(xo, yo).coefficients[1]) < 1e-12);

    Eigen::MatrixXd dup(5, 2);
    dup << 1, 1, 2, 2, 3, 3, 4, 4, 5, 5;
    CHECK(code_of([&] { ht::fit_pmt_ols(dup, Eigen::VectorXd::Ones(5)); }) == ErrorCode::RankDeficient);
}

TEST_CASE("PMT matches the normal equations") {
    ht::RngStream rng(13, 0);
    const int n = 50;
    Eigen::MatrixXd x(n, 4);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 4; ++j) x(i, j) = rng.normal();
        y[i] = 1.0 + x(i, 0) - 0.5 * x(i, 2) + 0.3 * rng.normal();
    }
    const auto fit = ht::fit_pmt_ols(x, y);
    Eigen::MatrixXd xa(n, 5);
    xa.col(0).setOnes();
    xa.rightCols(4) = x;
    const Eigen::VectorXd oracle = (xa.transpose() * xa).fullPivLu().solve(xa.transpose() * y);
    CHECK(testing::max_rel_err(fit.coefficients, oracle) < 1e-10);
    const Eigen::VectorXd resid = y - xa * fit.coefficients;
    CHECK((xa.transpose() * resid).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(fit.residual_variance == doctest::Approx(resid.squaredNorm() / (n - 5)).epsilon(1e-12));

    const auto affine = ht::fit_pmt_ols(x, 3.0 * y.array() + 7.0);
    const auto a = fit.predict(x), b = affine.predict(x);
    CHECK(ht::rank_of(std::vector<double>(a.data(), a.data() + n)) == ht::rank_of(std::vector<double>(b.data(), b.data() + n)));
}
