#include "ordst/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ordst/error.hpp"

namespace ordst {

TruthSpec TruthSpec::standard(std::size_t p) {
  TruthSpec s;
  const auto k = static_cast<Eigen::Index>(p);
  s.beta_mean = Eigen::VectorXd::Zero(k + 1);
  s.beta_mean(0) = 1.5;
  for (Eigen::Index j = 1; j <= k; ++j) s.beta_mean(j) = (j % 2 == 1 ? 0.5 : -0.3);
  s.beta_icar_var = Eigen::VectorXd::Constant(k + 1, 0.05);
  s.covariate_delta = Eigen::VectorXd::Constant(k, 0.6);
  return s;
}

void TruthSpec::validate(std::size_t p) const {
  const auto k = static_cast<Eigen::Index>(p);
  if (beta_mean.size() != k + 1 || beta_icar_var.size() != k + 1)
    throw Error("E_CONFIG", "truth spec needs P+1 beta means and variances");
  if (covariate_delta.size() != k) throw Error("E_CONFIG", "truth spec needs P covariate AR coefficients");
  if ((beta_icar_var.array() < 0.0).any() || gamma_icar_var < 0.0)
    throw Error("E_CONFIG", "field variances must be non-negative");
  if (!(sigma2_min > 0.0) || sigma2_max < sigma2_min) throw Error("E_CONFIG", "need 0 < sigma2_min <= sigma2_max");
  if (!(car_ridge > 0.0)) throw Error("E_CONFIG", "car_ridge must be positive");
  if (!(covariate_innovation_sd > 0.0) || std::abs(covariate_innovation_corr) >= 1.0)
    throw Error("E_CONFIG", "covariate innovation sd must be positive and |corr| < 1");
}

std::vector<GridCell> rectangular_grid(int rows, int cols) {
  std::vector<GridCell> g;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) g.push_back({r * cols + c + 1, r, c});
  return g;
}

std::vector<double> simulate_car_field(const LatticeGraph& graph, double variance, double mean, double ridge,
                                       Rng& rng) {
  const auto n = static_cast<Eigen::Index>(graph.size());
  std::vector<double> out(graph.size(), mean);
  if (variance == 0.0) return out;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    q(i, i) = static_cast<double>(graph.degree(static_cast<std::size_t>(i))) + ridge;
    for (std::size_t j : graph.neighbors(static_cast<std::size_t>(i))) q(i, static_cast<Eigen::Index>(j)) = -1.0;
  }
  q /= variance;
  Eigen::LLT<Eigen::MatrixXd> llt(q);
  if (llt.info() != Eigen::Success) throw Error("E_NOT_PD", "CAR precision not positive definite");
  Eigen::VectorXd eps(n);
  for (Eigen::Index i = 0; i < n; ++i) eps(i) = rng.normal();
  Eigen::VectorXd v = llt.matrixU().solve(eps);
  v.array() += mean - v.mean();
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = v(i);
  return out;
}

Eigen::VectorXd simulate_latent(const Eigen::VectorXd& beta, double gamma, double sigma2, const Eigen::MatrixXd& x,
                                Rng& rng) {
  const Eigen::VectorXd mu = x * beta;
  const double rho = inverse_logit(gamma);
  const double sd = std::sqrt(sigma2);
  Eigen::VectorXd z(mu.size());
  double prev = 0.0;
  for (Eigen::Index t = 0; t < mu.size(); ++t) {
    const double d = (t == 0 ? 0.0 : rho * prev) + sd * rng.normal();
    z(t) = mu(t) + d;
    prev = d;
  }
  return z;
}

SyntheticDataset simulate_dataset(std::span<const GridCell> grid, std::size_t weeks, std::size_t n_covariates,
                                  int interior_cutoffs, const TruthSpec& spec, std::uint64_t seed) {
  spec.validate(n_covariates);
  if (weeks < 2) throw Error("E_CONFIG", "need at least 2 weeks");
  const Cutoffs cutoffs(interior_cutoffs);
  const LatticeGraph graph = LatticeGraph::queen(grid);
  const std::size_t n = graph.size();
  const auto t_len = static_cast<Eigen::Index>(weeks);
  const auto k = static_cast<Eigen::Index>(n_covariates);
  const std::size_t t_train = spec.t_train == 0 ? weeks : spec.t_train;
  if (t_train > weeks) throw Error("E_CONFIG", "t_train exceeds the number of weeks");
  Rng rng(seed);

  SyntheticDataset ds;
  ds.grid.assign(grid.begin(), grid.end());
  std::sort(ds.grid.begin(), ds.grid.end(), [](const GridCell& a, const GridCell& b) { return a.site_id < b.site_id; });
  ds.truth.seed = seed;
  ds.truth.car_ridge = spec.car_ridge;
  ds.truth.field_method = "proper CAR draw with precision (D - A + ridge I) / variance, then mean-shifted";

  // Spatial fields.
  std::vector<std::vector<double>> beta_fields;
  for (Eigen::Index p = 0; p <= k; ++p)
    beta_fields.push_back(simulate_car_field(graph, spec.beta_icar_var(p), spec.beta_mean(p), spec.car_ridge, rng));
  const auto gamma_field = simulate_car_field(graph, spec.gamma_icar_var, spec.gamma_mean, spec.car_ridge, rng);

  // Raw covariates: seasonal cycle with a site-specific phase plus diagonal VAR(1).
  Eigen::MatrixXd chol = Eigen::MatrixXd::Identity(k, k);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(k, k, spec.covariate_innovation_corr);
  cov.diagonal().setOnes();
  cov *= spec.covariate_innovation_sd * spec.covariate_innovation_sd;
  if (k > 0) chol = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
  std::vector<Eigen::MatrixXd> raw(n, Eigen::MatrixXd(t_len, k));
  for (std::size_t i = 0; i < n; ++i) {
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    Eigen::VectorXd prev = Eigen::VectorXd::Zero(k), eps(k);
    for (Eigen::Index t = 0; t < t_len; ++t) {
      for (Eigen::Index j = 0; j < k; ++j) eps(j) = rng.normal();
      Eigen::VectorXd cur = spec.deterministic_covariates ? Eigen::VectorXd::Zero(k)
                                                          : Eigen::VectorXd(spec.covariate_delta.cwiseProduct(prev) + chol * eps);
      for (Eigen::Index j = 0; j < k; ++j) {
        const double season = spec.seasonal_amplitude *
                              std::sin(2.0 * std::numbers::pi * static_cast<double>(t + 1) / kSeasonalPeriod +
                                       phase + static_cast<double>(j));
        raw[i](t, j) = season + cur(j);
      }
      prev = cur;
    }
    ds.truth.covariate.push_back({spec.covariate_delta, cov});
  }

  // Pooled standardisation over training weeks.
  ds.truth.covariate_mean = Eigen::VectorXd::Zero(k);
  ds.truth.covariate_sd = Eigen::VectorXd::Ones(k);
  const double count = static_cast<double>(n * t_train);
  for (Eigen::Index j = 0; j < k; ++j) {
    double s = 0.0;
    for (const auto& r : raw) s += r.col(j).head(static_cast<Eigen::Index>(t_train)).sum();
    const double m = s / count;
    double ss = 0.0;
    for (const auto& r : raw) ss += (r.col(j).head(static_cast<Eigen::Index>(t_train)).array() - m).square().sum();
    const double sd = std::sqrt(ss / count);
    ds.truth.covariate_mean(j) = m;
    ds.truth.covariate_sd(j) = sd > 0.0 ? sd : 1.0;
  }

  for (std::size_t i = 0; i < n; ++i) {
    SitePanel panel;
    panel.site_id = static_cast<int>(i + 1);
    panel.x.resize(t_len, k + 1);
    panel.x.col(0).setOnes();
    for (Eigen::Index j = 0; j < k; ++j)
      panel.x.col(j + 1) = (raw[i].col(j).array() - ds.truth.covariate_mean(j)) / ds.truth.covariate_sd(j);

    SiteParams truth;
    truth.beta.resize(k + 1);
    for (Eigen::Index p = 0; p <= k; ++p) truth.beta(p) = beta_fields[static_cast<std::size_t>(p)][i];
    truth.gamma = gamma_field[i];
    truth.sigma2 = spec.sigma2_min + (spec.sigma2_max - spec.sigma2_min) * rng.uniform();
    truth.z = simulate_latent(truth.beta, truth.gamma, truth.sigma2, panel.x, rng);
    panel.y.resize(weeks);
    for (Eigen::Index t = 0; t < t_len; ++t) panel.y[static_cast<std::size_t>(t)] = ordinal_from_latent(truth.z(t), cutoffs);
    ds.panels.push_back(std::move(panel));
    ds.truth.sites.push_back(std::move(truth));
  }
  return ds;
}

}  // namespace ordst
