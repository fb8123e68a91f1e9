#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <span>

namespace ht {

/// xoshiro256** seeded from (seed, stream_id). The stream is advanced by
/// stream_id jumps of 2^128 draws, so distinct stream ids never overlap.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();

    /// Uniform on the open interval (0, 1).
    double uniform();
    double normal();
    double exponential();

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

private:
    void jump();

    std::array<std::uint64_t, 4> state_{};
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::normal_distribution<double> normal_;
};

/// Mix several values into one 64-bit seed (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// N(mean, variance) restricted to (lower, upper); either bound may be infinite.
/// Uses exponential-proposal rejection in the tails so intervals far from the
/// mean (e.g. beyond 8 sd) stay exact.
double sample_truncated_normal(double mean, double variance, double lower, double upper, RngStream& rng);

/// Standard normal restricted to (a, b).
double sample_standard_truncated_normal(double a, double b, RngStream& rng);

/// scale_sum / X with X ~ chi-square(df).
double sample_scaled_inv_chisq(double df, double scale_sum, RngStream& rng);

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, RngStream& rng);

std::size_t sample_multinomial_index(std::span<const double> probs, RngStream& rng);

} // namespace ht
