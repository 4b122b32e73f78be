#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <limits>
#include <vector>

namespace ordst {

/// Fixed ordinal cutpoints (-inf, 0, 1, ..., J-1, +inf); J+1 levels 0..J.
class Cutoffs {
 public:
  explicit Cutoffs(int interior);

  int interior() const noexcept { return interior_; }
  int levels() const noexcept { return interior_ + 1; }

  /// alpha_k for k = 0..J+1.
  double alpha(int k) const;

 private:
  int interior_;
};

/// Half-open latent interval (lower, upper] mapped to one ordinal level.
struct LatentBounds {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

int ordinal_from_latent(double z, const Cutoffs& cutoffs);
LatentBounds latent_bounds(int level, const Cutoffs& cutoffs);

/// Observed series for one site. Column 0 of x is the intercept (all ones).
struct SitePanel {
  int site_id = 0;
  std::vector<int> y;
  Eigen::MatrixXd x;

  std::size_t length() const noexcept { return y.size(); }
  std::size_t n_coef() const noexcept { return static_cast<std::size_t>(x.cols()); }

  /// Throws if shapes disagree, levels fall outside the cutoffs, the
  /// intercept column is not 1, or any entry is non-finite.
  void validate(const Cutoffs& cutoffs) const;
};

/// Site-level parameters theta_i plus the latent series.
struct SiteParams {
  Eigen::VectorXd beta;
  double gamma = 0.0;  // logit(rho)
  double sigma2 = 1.0;
  Eigen::VectorXd z;

  double rho() const;
  bool operator==(const SiteParams& other) const;
};

/// Spatial (ICAR) variances: one for the gamma field, one per beta coordinate.
struct HyperParams {
  double sigma2_gamma = 1.0;
  Eigen::VectorXd sigma2_beta;

  static HyperParams ones(std::size_t n_coef);
};

/// Independence prior of the per-site fit: beta_p ~ N(0, xi_p^2),
/// gamma ~ standard logistic, sigma2 ~ IG(shape, scale).
struct Stage1Prior {
  Eigen::VectorXd xi;
  double ig_shape = 0.5;
  double ig_scale = 0.5;

  static Stage1Prior standard(std::size_t n_coef, double xi = 3.0);
  void validate(std::size_t n_coef) const;
};

double logit(double rho);
double inverse_logit(double gamma);

double normal_log_pdf(double x, double mean, double var);
double logistic_log_pdf(double gamma);
/// Shape-scale parameterisation: density proportional to x^-(shape+1) exp(-scale/x).
double inv_gamma_log_pdf(double x, double shape, double scale);

/// Residuals e_t of the AR(1) latent process; e_1 = z_1 - x_1 b,
/// e_t = (z_t - x_t b) - rho (z_{t-1} - x_{t-1} b).
Eigen::VectorXd ar1_residuals(const Eigen::VectorXd& z, const Eigen::VectorXd& beta, double gamma,
                              const Eigen::MatrixXd& x);

/// Sum of the T Gaussian log densities of the latent process.
double ar1_log_density(const Eigen::VectorXd& z, const Eigen::VectorXd& beta, double gamma,
                       double sigma2, const Eigen::MatrixXd& x);

double stage1_log_prior(const SiteParams& params, const Stage1Prior& prior);

/// True when every z_t lies in latent_bounds(y_t).
bool latent_consistent(const Eigen::VectorXd& z, const SitePanel& panel, const Cutoffs& cutoffs);

}  // namespace ordst
