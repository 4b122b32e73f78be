#include "ordst/forecast.hpp"

#include <algorithm>
#include <cmath>

#include "ordst/error.hpp"
#include "ordst/parallel.hpp"
#include "ordst/random.hpp"

namespace ordst {

ForecastDraws forecast_drought(const PosteriorStore& z_store, const VarPosteriorStore& x_store,
                               std::span<const ForecastSite> sites, const Cutoffs& cutoffs, std::size_t horizon,
                               std::uint64_t seed, std::size_t workers) {
  if (horizon < 1) throw Error("E_HORIZON", "forecast horizon must be >= 1");
  if (z_store.n_draws() != x_store.n_draws())
    throw Error("E_DRAW_MISMATCH", "latent-model store has " + std::to_string(z_store.n_draws()) +
                                       " draws but covariate store has " + std::to_string(x_store.n_draws()));
  if (z_store.n_draws() == 0) throw Error("E_EMPTY_STORE", "no posterior draws to forecast from");
  const std::size_t n = sites.size();
  if (z_store.n_sites() != n || x_store.n_sites() != n)
    throw Error("E_SHAPE", "site counts differ between stores and forecast inputs");

  ForecastDraws out;
  out.n_draws = z_store.n_draws();
  out.n_sites = n;
  out.horizon = horizon;
  out.n_cov = static_cast<std::size_t>(sites[0].fit->n_covariates());
  out.site_ids = z_store.site_ids;
  out.z.resize(out.n_draws * n * horizon);
  out.y.resize(out.z.size());
  out.x.resize(out.z.size() * out.n_cov);

  // Last observed covariates (detrended) per site.
  std::vector<Eigen::VectorXd> last_detrended(n);
  for (std::size_t i = 0; i < n; ++i) {
    const SitePanel& p = *sites[i].panel;
    const auto t_len = static_cast<Eigen::Index>(p.length());
    if (p.x.cols() != static_cast<Eigen::Index>(out.n_cov) + 1)
      throw Error("E_SHAPE", "site " + std::to_string(p.site_id) + ": covariate count differs from seasonal fit");
    last_detrended[i] = (p.x.row(t_len - 1).tail(out.n_cov) - sites[i].fit->trend(static_cast<double>(t_len))).transpose();
  }

  parallel_for(out.n_draws, workers, [&](std::size_t m) {
    Rng rng(derive_stream_seed(seed, m));
    Eigen::RowVectorXd row(out.n_cov + 1);
    row(0) = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const SitePanel& p = *sites[i].panel;
      const auto t_len = static_cast<Eigen::Index>(p.length());
      const SiteParams& th = z_store.draws[i][m];
      const auto path = simulate_var_forward(last_detrended[i], x_store.draws[i][m], horizon, *sites[i].fit,
                                             static_cast<double>(t_len), rng);
      const double rho = th.rho();
      const double sd = std::sqrt(th.sigma2);
      double z_prev = th.z(t_len - 1);
      double mean_prev = p.x.row(t_len - 1).dot(th.beta);
      for (std::size_t h = 0; h < horizon; ++h) {
        const auto hi = static_cast<Eigen::Index>(h);
        row.tail(out.n_cov) = path.covariates.row(hi);
        const double mean = row.dot(th.beta);
        const double z = mean + rho * (z_prev - mean_prev) + sd * rng.normal();
        const std::size_t idx = out.at(m, i, h);
        out.z[idx] = z;
        out.y[idx] = ordinal_from_latent(z, cutoffs);
        for (std::size_t k = 0; k < out.n_cov; ++k)
          out.x[idx * out.n_cov + k] = path.covariates(hi, static_cast<Eigen::Index>(k));
        z_prev = z;
        mean_prev = mean;
      }
    }
  });
  return out;
}

WithinOne within_one_probability(const ForecastDraws& draws, const Eigen::MatrixXi& holdout) {
  if (static_cast<std::size_t>(holdout.rows()) != draws.n_sites ||
      static_cast<std::size_t>(holdout.cols()) != draws.horizon)
    throw Error("E_SHAPE", "holdout must be n_sites x horizon");
  WithinOne w;
  w.by_site = Eigen::MatrixXd::Zero(holdout.rows(), holdout.cols());
  for (std::size_t m = 0; m < draws.n_draws; ++m)
    for (std::size_t i = 0; i < draws.n_sites; ++i)
      for (std::size_t h = 0; h < draws.horizon; ++h) {
        const int diff = draws.y[draws.at(m, i, h)] - holdout(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(h));
        if (std::abs(diff) <= 1) w.by_site(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(h)) += 1.0;
      }
  if (draws.n_draws > 0) w.by_site /= static_cast<double>(draws.n_draws);
  w.mean_by_horizon = w.by_site.colwise().mean().transpose();
  return w;
}

Eigen::VectorXd rmse(const Eigen::MatrixXd& point, const Eigen::MatrixXd& holdout) {
  if (point.rows() != holdout.rows() || point.cols() != holdout.cols() || point.rows() == 0)
    throw Error("E_SHAPE", "rmse: forecast and holdout dimensions differ");
  return ((point - holdout).array().square().colwise().mean()).sqrt().transpose();
}

int posterior_median_level(const ForecastDraws& draws, std::size_t site, std::size_t horizon) {
  if (draws.n_draws == 0) throw Error("E_EMPTY_STORE", "median of an empty draw set");
  if (site >= draws.n_sites || horizon >= draws.horizon) throw Error("E_SHAPE", "site or horizon out of range");
  std::vector<int> v(draws.n_draws);
  for (std::size_t m = 0; m < draws.n_draws; ++m) v[m] = draws.y[draws.at(m, site, horizon)];
  const std::size_t k = (v.size() - 1) / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

Eigen::MatrixXd covariate_point_forecast(const ForecastDraws& draws, std::size_t k) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(draws.n_sites),
                                              static_cast<Eigen::Index>(draws.horizon));
  for (std::size_t m = 0; m < draws.n_draws; ++m)
    for (std::size_t i = 0; i < draws.n_sites; ++i)
      for (std::size_t h = 0; h < draws.horizon; ++h)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(h)) += draws.x[draws.at_x(m, i, h, k)];
  if (draws.n_draws > 0) out /= static_cast<double>(draws.n_draws);
  return out;
}

}  // namespace ordst
