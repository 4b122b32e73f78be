#include "ordst/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ordst/error.hpp"

namespace ordst {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}  // namespace

Cutoffs::Cutoffs(int interior) : interior_(interior) {
  if (interior < 1) throw Error("E_CONFIG", "need at least one interior cutoff (J >= 1)");
}

double Cutoffs::alpha(int k) const {
  if (k <= 0) return -kInf;
  if (k > interior_) return kInf;
  return static_cast<double>(k - 1);
}

int ordinal_from_latent(double z, const Cutoffs& cutoffs) {
  if (z <= 0.0) return 0;
  const double j = static_cast<double>(cutoffs.interior());
  if (z > j - 1.0) return cutoffs.interior();
  // z in (k-1, k] maps to level k.
  return static_cast<int>(std::ceil(z));
}

LatentBounds latent_bounds(int level, const Cutoffs& cutoffs) {
  if (level < 0 || level > cutoffs.interior())
    throw Error("E_LEVEL", "ordinal level " + std::to_string(level) + " outside 0.." +
                               std::to_string(cutoffs.interior()));
  return {cutoffs.alpha(level), cutoffs.alpha(level + 1)};
}

void SitePanel::validate(const Cutoffs& cutoffs) const {
  const std::string where = "site " + std::to_string(site_id);
  if (y.empty()) throw Error("E_PANEL", where + ": empty series");
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw Error("E_PANEL", where + ": covariate rows do not match series length");
  if (x.cols() < 1) throw Error("E_PANEL", where + ": covariate matrix needs an intercept column");
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (y[t] < 0 || y[t] > cutoffs.interior())
      throw Error("E_LEVEL", where + ": level " + std::to_string(y[t]) + " out of range at t=" +
                                 std::to_string(t + 1));
    if (x(t, 0) != 1.0) throw Error("E_PANEL", where + ": intercept column must be 1");
  }
  if (!x.allFinite()) throw Error("E_PANEL", where + ": non-finite covariate");
}

double SiteParams::rho() const { return inverse_logit(gamma); }

bool SiteParams::operator==(const SiteParams& other) const {
  return beta.size() == other.beta.size() && z.size() == other.z.size() && beta == other.beta &&
         gamma == other.gamma && sigma2 == other.sigma2 && z == other.z;
}

HyperParams HyperParams::ones(std::size_t n_coef) {
  return {1.0, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n_coef))};
}

Stage1Prior Stage1Prior::standard(std::size_t n_coef, double xi) {
  Stage1Prior p;
  p.xi = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_coef), xi);
  return p;
}

void Stage1Prior::validate(std::size_t n_coef) const {
  if (static_cast<std::size_t>(xi.size()) != n_coef)
    throw Error("E_CONFIG", "prior xi has " + std::to_string(xi.size()) + " entries, expected " +
                                std::to_string(n_coef));
  if ((xi.array() <= 0.0).any()) throw Error("E_CONFIG", "prior xi must be positive");
  if (!(ig_shape > 0.0) || !(ig_scale > 0.0))
    throw Error("E_CONFIG", "inverse-gamma shape and scale must be positive");
}

double logit(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw Error("E_DOMAIN", "logit argument must lie in (0, 1)");
  return std::log(rho) - std::log1p(-rho);
}

double inverse_logit(double gamma) {
  if (gamma >= 0.0) return 1.0 / (1.0 + std::exp(-gamma));
  const double e = std::exp(gamma);
  return e / (1.0 + e);
}

double normal_log_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

double logistic_log_pdf(double gamma) {
  // -g - 2 log(1 + e^-g), written to stay finite for large |g|.
  const double a = std::abs(gamma);
  return -a - 2.0 * std::log1p(std::exp(-a));
}

double inv_gamma_log_pdf(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

Eigen::VectorXd ar1_residuals(const Eigen::VectorXd& z, const Eigen::VectorXd& beta, double gamma,
                              const Eigen::MatrixXd& x) {
  const Eigen::VectorXd d = z - x * beta;
  const double rho = inverse_logit(gamma);
  Eigen::VectorXd e(d.size());
  if (d.size() == 0) return e;
  e(0) = d(0);
  for (Eigen::Index t = 1; t < d.size(); ++t) e(t) = d(t) - rho * d(t - 1);
  return e;
}

double ar1_log_density(const Eigen::VectorXd& z, const Eigen::VectorXd& beta, double gamma,
                       double sigma2, const Eigen::MatrixXd& x) {
  if (z.size() != x.rows() || beta.size() != x.cols())
    throw Error("E_SHAPE", "ar1_log_density: dimension mismatch");
  if (!(sigma2 > 0.0)) throw Error("E_DOMAIN", "sigma2 must be positive");
  const Eigen::VectorXd e = ar1_residuals(z, beta, gamma, x);
  const double n = static_cast<double>(z.size());
  return -0.5 * (n * (kLog2Pi + std::log(sigma2)) + e.squaredNorm() / sigma2);
}

double stage1_log_prior(const SiteParams& params, const Stage1Prior& prior) {
  if (!(params.sigma2 > 0.0)) throw Error("E_DOMAIN", "sigma2 must be positive");
  double lp = 0.0;
  for (Eigen::Index p = 0; p < params.beta.size(); ++p)
    lp += normal_log_pdf(params.beta(p), 0.0, prior.xi(p) * prior.xi(p));
  lp += logistic_log_pdf(params.gamma);
  lp += inv_gamma_log_pdf(params.sigma2, prior.ig_shape, prior.ig_scale);
  return lp;
}

bool latent_consistent(const Eigen::VectorXd& z, const SitePanel& panel, const Cutoffs& cutoffs) {
  if (static_cast<std::size_t>(z.size()) != panel.y.size()) return false;
  for (std::size_t t = 0; t < panel.y.size(); ++t) {
    const auto b = latent_bounds(panel.y[t], cutoffs);
    const double v = z(static_cast<Eigen::Index>(t));
    if (!(v > b.lower && v <= b.upper)) return false;
  }
  return true;
}

}  // namespace ordst
