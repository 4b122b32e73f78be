#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

namespace ordst {

/// Seeded 64-bit Mersenne Twister plus the handful of variates the samplers
/// need. One instance per independent stream; never shared across threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform on the open interval (0, 1).
  double uniform_open() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }
  double normal() { return normal_(engine_); }
  double exponential();
  /// Gamma with unit scale.
  double gamma(double shape);
  /// Uniform index in [0, n).
  std::size_t index(std::size_t n);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// SplitMix64 finaliser; used to decorrelate stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for an independent stream (per site, per draw) derived from the
/// master seed, so results do not depend on scheduling.
std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t stream_id);

double std_normal_cdf(double x);
/// Upper tail 1 - Phi(x), accurate for large x.
double std_normal_ccdf(double x);
double std_normal_quantile(double p);

/// Normal(mean, sd^2) truncated to the interval (lower, upper]; either bound
/// may be infinite. Inverse-CDF on the tail-appropriate side, with an
/// exponential-rejection fallback once the tail mass underflows.
double truncated_normal(Rng& rng, double mean, double sd, double lower, double upper);

/// Inverse gamma in shape-scale form (mean scale / (shape - 1)).
double inverse_gamma(Rng& rng, double shape, double scale);

/// Inverse Wishart with density proportional to
/// |S|^{-(df + J + 1)/2} exp(-tr(scale S^{-1}) / 2); mean scale / (df - J - 1).
Eigen::MatrixXd inverse_wishart(Rng& rng, double df, const Eigen::MatrixXd& scale);

/// Draw from N(Q^{-1} b, Q^{-1}) given precision Q and linear term b.
/// Returns false (leaving out untouched) if Q is not positive definite.
bool mvn_canonical(Rng& rng, const Eigen::MatrixXd& precision, const Eigen::VectorXd& linear,
                   Eigen::VectorXd& out);

}  // namespace ordst
