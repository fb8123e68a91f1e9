#include "hybridtarget/random.hpp"

#include "hybridtarget/error.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace ht {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

constexpr double kSqrt2Pi = 2.5066282746310002;

// a >= 0: sample Z | a < Z < b.
double sample_right_of(double a, double b, RngStream& rng) {
    const double width = b - a;
    // Narrow interval: uniform proposal, acceptance at least exp(-1).
    if (width * (a + b) <= 2.0) {
        for (;;) {
            const double x = a + width * rng.uniform();
            if (std::log(rng.uniform()) <= 0.5 * (a * a - x * x) && x > a && x < b) return x;
        }
    }
    if (a < 0.5) {
        for (;;) {
            const double x = std::abs(rng.normal());
            if (x > a && x < b) return x;
        }
    }
    // Tail: translated exponential proposal with the optimal rate.
    const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
        const double x = a + rng.exponential() / rate;
        if (!(x < b) || !(x > a)) continue;
        const double d = x - rate;
        if (std::log(rng.uniform()) <= -0.5 * d * d) return x;
    }
}

} // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = base;
    std::uint64_t out = splitmix64(x);
    x ^= a * 0xd1b54a32d192ed03ULL;
    out ^= splitmix64(x);
    x ^= b * 0xaef17502108ef2d9ULL;
    out ^= splitmix64(x);
    return out;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
    std::uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
    for (std::uint64_t i = 0; i < stream_id; ++i) jump();
}

RngStream::result_type RngStream::operator()() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

void RngStream::jump() {
    static constexpr std::array<std::uint64_t, 4> kJump = {0x180ec6d33cfd0abaULL, 0xd5a61266f0c9392cULL,
                                                           0xa9582618e03fc9aaULL, 0x39abdc4529b1661cULL};
    std::array<std::uint64_t, 4> s{};
    for (auto word : kJump) {
        for (int b = 0; b < 64; ++b) {
            if (word & (std::uint64_t{1} << b)) {
                for (std::size_t i = 0; i < 4; ++i) s[i] ^= state_[i];
            }
            (*this)();
        }
    }
    state_ = s;
}

double RngStream::uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

double RngStream::normal() { return normal_(*this); }

double RngStream::exponential() { return -std::log(uniform()); }

double sample_standard_truncated_normal(double a, double b, RngStream& rng) {
    if (!(a < b)) {
        throw Error(ErrorCode::EmptyInterval, "truncation interval (" + std::to_string(a) + ", " + std::to_string(b) + ") is empty");
    }
    if (a >= 0.0) return sample_right_of(a, b, rng);
    if (b <= 0.0) return -sample_right_of(-b, -a, rng);
    // Interval straddles zero.
    if (b - a < kSqrt2Pi) {
        for (;;) {
            const double x = a + (b - a) * rng.uniform();
            if (std::log(rng.uniform()) <= -0.5 * x * x && x > a && x < b) return x;
        }
    }
    for (;;) {
        const double x = rng.normal();
        if (x > a && x < b) return x;
    }
}

double sample_truncated_normal(double mean, double variance, double lower, double upper, RngStream& rng) {
    if (!(variance > 0.0) || !std::isfinite(variance) || !std::isfinite(mean)) {
        throw Error(ErrorCode::InvalidParam, "truncated normal needs finite mean and positive variance");
    }
    if (!(lower < upper)) {
        throw Error(ErrorCode::EmptyInterval, "truncation interval (" + std::to_string(lower) + ", " + std::to_string(upper) + ") is empty");
    }
    const double sd = std::sqrt(variance);
    const double a = (lower - mean) / sd;
    const double b = (upper - mean) / sd;
    // Rounding in the affine map can land on a bound when the interval is tiny.
    for (int attempt = 0; attempt < 8; ++attempt) {
        const double x = mean + sd * sample_standard_truncated_normal(a, b, rng);
        if (x > lower && x < upper) return x;
    }
    const double mid = std::midpoint(lower, upper);
    if (mid > lower && mid < upper) return mid;
    throw Error(ErrorCode::EmptyInterval, "no representable value strictly inside the truncation interval");
}

double sample_scaled_inv_chisq(double df, double scale_sum, RngStream& rng) {
    if (!(df > 0.0) || !(scale_sum > 0.0) || !std::isfinite(df) || !std::isfinite(scale_sum)) {
        throw Error(ErrorCode::InvalidParam, "scaled inverse chi-square needs df > 0 and scale_sum > 0");
    }
    std::chi_squared_distribution<double> chisq(df);
    double x = 0.0;
    do {
        x = chisq(rng);
    } while (!(x > 0.0));
    return scale_sum / x;
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, RngStream& rng) {
    if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
        throw Error(ErrorCode::DimensionMismatch, "covariance does not match mean dimension");
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotPositiveDefinite, "covariance is not positive definite");
    Eigen::VectorXd z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return mean + llt.matrixL() * z;
}

std::size_t sample_multinomial_index(std::span<const double> probs, RngStream& rng) {
    if (probs.empty()) throw Error(ErrorCode::InvalidProbabilities, "empty probability vector");
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw Error(ErrorCode::InvalidProbabilities, "probabilities must be nonnegative");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-8) {
        throw Error(ErrorCode::InvalidProbabilities, "probabilities sum to " + std::to_string(total));
    }
    const double u = rng.uniform() * total;
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t l = 0; l < probs.size(); ++l) {
        if (probs[l] > 0.0) last_positive = l;
        cumulative += probs[l];
        if (u < cumulative && probs[l] > 0.0) return l;
    }
    return last_positive;
}

} // namespace ht
