// Independent numerical oracles shared by the unit and acceptance tests.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "ordst/model.hpp"
#include "ordst/random.hpp"

namespace testing_support {

/// Kolmogorov-Smirnov distance between the sample and a continuous CDF.
inline double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double f = cdf(samples[k]);
    d = std::max({d, std::abs(f - static_cast<double>(k) / n), std::abs(static_cast<double>(k + 1) / n - f)});
  }
  return d;
}

/// CDF obtained by normalising exp(log_density) on an evenly spaced grid of
/// `points` nodes over [lo, hi] (trapezoid rule, linear interpolation).
class GriddyCdf {
 public:
  GriddyCdf(const std::function<double(double)>& log_density, double lo, double hi, int points = 2000)
      : lo_(lo), hi_(hi), x_(points), cdf_(points, 0.0) {
    std::vector<double> lf(points);
    double mx = -INFINITY;
    for (int k = 0; k < points; ++k) {
      x_[k] = lo + (hi - lo) * k / (points - 1);
      lf[k] = log_density(x_[k]);
      mx = std::max(mx, lf[k]);
    }
    for (int k = 1; k < points; ++k) {
      const double a = std::exp(lf[k - 1] - mx), b = std::exp(lf[k] - mx);
      cdf_[k] = cdf_[k - 1] + 0.5 * (a + b) * (x_[k] - x_[k - 1]);
    }
    const double total = cdf_.back();
    for (double& c : cdf_) c /= total;
  }

  double operator()(double v) const {
    if (v <= lo_) return 0.0;
    if (v >= hi_) return 1.0;
    const double pos = (v - lo_) / (hi_ - lo_) * static_cast<double>(x_.size() - 1);
    const auto k = static_cast<std::size_t>(pos);
    const double w = pos - static_cast<double>(k);
    return k + 1 < x_.size() ? (1.0 - w) * cdf_[k] + w * cdf_[k + 1] : 1.0;
  }

 private:
  double lo_, hi_;
  std::vector<double> x_;
  std::vector<double> cdf_;
};

/// Mean of N(mu, s^2) truncated to (a, b] from the closed form.
inline double truncated_normal_mean(double mu, double s, double a, double b) {
  const auto phi = [](double x) { return std::isinf(x) ? 0.0 : std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); };
  const auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  const double al = (a - mu) / s, be = (b - mu) / s;
  return mu + s * (phi(al) - phi(be)) / (cdf(be) - cdf(al));
}

/// Covariate matrix with an intercept and P standard-normal columns.
inline Eigen::MatrixXd random_design(ordst::Rng& rng, Eigen::Index t, Eigen::Index p) {
  Eigen::MatrixXd x(t, p + 1);
  x.col(0).setOnes();
  for (Eigen::Index r = 0; r < t; ++r)
    for (Eigen::Index c = 1; c <= p; ++c) x(r, c) = rng.normal();
  return x;
}

/// Monte Carlo standard error of the mean from batch means.
inline double batch_mcse(const std::vector<double>& v, std::size_t batches = 50) {
  const std::size_t len = v.size() / batches;
  std::vector<double> means(batches, 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t k = 0; k < len; ++k) means[b] += v[b * len + k];
    means[b] /= static_cast<double>(len);
  }
  double m = 0.0;
  for (double x : means) m += x;
  m /= static_cast<double>(batches);
  double ss = 0.0;
  for (double x : means) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace testing_support
