#include "ordst/random.hpp"

#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <limits>

#include "ordst/error.hpp"

namespace ordst {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Below this tail mass the inverse-CDF path loses too much precision.
constexpr double kTailMassFloor = 1e-290;

// Sample the standard normal restricted to [a, b] with 0 <= a < b (b may be inf).
double upper_tail_standard(Rng& rng, double a, double b) {
  const double qa = std_normal_ccdf(a);
  if (qa > kTailMassFloor) {
    const double qb = std::isinf(b) ? 0.0 : std_normal_ccdf(b);
    const double p = qb + rng.uniform_open() * (qa - qb);
    double x = kSqrt2 * boost::math::erfc_inv(2.0 * p);
    return std::clamp(x, a, b);
  }
  // Far tail: exponential proposal (Robert 1995) or, for intervals much
  // narrower than the tail scale, a uniform proposal.
  if (b - a < 1.0 / a) {
    for (;;) {
      const double x = a + rng.uniform() * (b - a);
      if (std::log(rng.uniform_open()) <= -0.5 * (x * x - a * a)) return x;
    }
  }
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double x = a + rng.exponential() / lambda;
    if (x > b) continue;
    const double d = x - lambda;
    if (std::log(rng.uniform_open()) <= -0.5 * d * d) return x;
  }
}

}  // namespace

double Rng::exponential() { return -std::log(uniform_open()); }

double Rng::gamma(double shape) {
  std::gamma_distribution<double> g(shape, 1.0);
  return g(engine_);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw Error("E_DOMAIN", "Rng::index on empty range");
  std::uniform_int_distribution<std::size_t> d(0, n - 1);
  return d(engine_);
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t stream_id) {
  return mix64(master ^ mix64(stream_id));
}

double std_normal_cdf(double x) { return 0.5 * boost::math::erfc(-x / kSqrt2); }

double std_normal_ccdf(double x) { return 0.5 * boost::math::erfc(x / kSqrt2); }

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -kInf;
    if (p == 1.0) return kInf;
    throw Error("E_DOMAIN", "normal quantile needs p in [0, 1]");
  }
  return -kSqrt2 * boost::math::erfc_inv(2.0 * p);
}

double truncated_normal(Rng& rng, double mean, double sd, double lower, double upper) {
  if (!(sd > 0.0) || !(lower < upper)) throw Error("E_DOMAIN", "truncated_normal: invalid arguments");
  const double a = (lower - mean) / sd;
  const double b = (upper - mean) / sd;
  double x;
  if (a >= 0.0) {
    x = upper_tail_standard(rng, a, b);
  } else if (b <= 0.0) {
    x = -upper_tail_standard(rng, -b, -a);
  } else {
    const double pa = std::isinf(a) ? 0.0 : std_normal_cdf(a);
    const double pb = std::isinf(b) ? 1.0 : std_normal_cdf(b);
    const double p = pa + rng.uniform_open() * (pb - pa);
    // Invert on whichever side keeps the most precision.
    x = p < 0.5 ? std_normal_quantile(p) : kSqrt2 * boost::math::erfc_inv(2.0 * (1.0 - p));
    x = std::clamp(x, a, b);
  }
  double z = mean + sd * x;
  // Keep the draw inside (lower, upper] after rounding.
  if (!(z > lower)) z = std::nextafter(lower, kInf);
  if (z > upper) z = upper;
  return z;
}

double inverse_gamma(Rng& rng, double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0)) throw Error("E_DOMAIN", "inverse_gamma: invalid arguments");
  double g;
  do {
    g = rng.gamma(shape);
  } while (!(g > 0.0));
  return scale / g;
}

Eigen::MatrixXd inverse_wishart(Rng& rng, double df, const Eigen::MatrixXd& scale) {
  const Eigen::Index j = scale.rows();
  if (scale.cols() != j || !(df > static_cast<double>(j) - 1.0))
    throw Error("E_DOMAIN", "inverse_wishart: invalid arguments");
  // S^{-1} ~ Wishart(df, scale^{-1}); Bartlett factor of the precision.
  Eigen::LLT<Eigen::MatrixXd> llt_scale(scale);
  if (llt_scale.info() != Eigen::Success) throw Error("E_NOT_PD", "inverse_wishart: scale not positive definite");
  const Eigen::MatrixXd scale_inv = llt_scale.solve(Eigen::MatrixXd::Identity(j, j));
  Eigen::LLT<Eigen::MatrixXd> llt_inv(scale_inv);
  const Eigen::MatrixXd l = llt_inv.matrixL();

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(j, j);
  for (Eigen::Index i = 0; i < j; ++i) {
    a(i, i) = std::sqrt(2.0 * rng.gamma(0.5 * (df - static_cast<double>(i))));
    for (Eigen::Index k = 0; k < i; ++k) a(i, k) = rng.normal();
  }
  // precision = (L A)(L A)'; S = (L A)^{-T} (L A)^{-1}.
  const Eigen::MatrixXd la = l * a;
  const Eigen::MatrixXd la_inv =
      la.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(j, j));
  Eigen::MatrixXd s = la_inv.transpose() * la_inv;
  return 0.5 * (s + s.transpose());
}

bool mvn_canonical(Rng& rng, const Eigen::MatrixXd& precision, const Eigen::VectorXd& linear,
                   Eigen::VectorXd& out) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) return false;
  const Eigen::VectorXd mean = llt.solve(linear);
  Eigen::VectorXd eps(linear.size());
  for (Eigen::Index k = 0; k < eps.size(); ++k) eps(k) = rng.normal();
  out = mean + llt.matrixU().solve(eps);
  return true;
}

}  // namespace ordst
