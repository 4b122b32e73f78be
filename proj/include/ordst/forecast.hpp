#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "ordst/covariate.hpp"
#include "ordst/model.hpp"
#include "ordst/state.hpp"

namespace ordst {

/// Posterior-predictive draws laid out [draw][site][horizon] (and [cov] for
/// covariates). Horizon index h = 0 is week T+1.
struct ForecastDraws {
  std::size_t n_draws = 0;
  std::size_t n_sites = 0;
  std::size_t horizon = 0;
  std::size_t n_cov = 0;
  std::vector<int> site_ids;
  std::vector<double> z;
  std::vector<int> y;
  std::vector<double> x;

  std::size_t at(std::size_t m, std::size_t i, std::size_t h) const { return (m * n_sites + i) * horizon + h; }
  std::size_t at_x(std::size_t m, std::size_t i, std::size_t h, std::size_t k) const {
    return at(m, i, h) * n_cov + k;
  }
};

/// Per site inputs that stay fixed across draws.
struct ForecastSite {
  const SitePanel* panel = nullptr;  // training panel; its last row is week T
  const FourierFit* fit = nullptr;
};

/// Pairs z_store draw m with x_store draw m, simulates covariates forward,
/// then the latent AR(1) process from Z_T, and maps to ordinal levels. Draw m
/// uses the stream derive_stream_seed(seed, m).
ForecastDraws forecast_drought(const PosteriorStore& z_store, const VarPosteriorStore& x_store,
                               std::span<const ForecastSite> sites, const Cutoffs& cutoffs, std::size_t horizon,
                               std::uint64_t seed, std::size_t workers = 1);

struct WithinOne {
  Eigen::MatrixXd by_site;       // n_sites x horizon
  Eigen::VectorXd mean_by_horizon;
};

/// Fraction of draws with |Y_draw - Y_true| <= 1; holdout is n_sites x horizon.
WithinOne within_one_probability(const ForecastDraws& draws, const Eigen::MatrixXi& holdout);

/// Root mean squared error over rows, per column (horizon).
Eigen::VectorXd rmse(const Eigen::MatrixXd& point, const Eigen::MatrixXd& holdout);

/// Lower median of the ordinal draws at (site, horizon).
int posterior_median_level(const ForecastDraws& draws, std::size_t site, std::size_t horizon);

/// Posterior-mean covariate forecast for covariate k, n_sites x horizon.
Eigen::MatrixXd covariate_point_forecast(const ForecastDraws& draws, std::size_t k);

}  // namespace ordst
