#include "ordst/covariate.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>

#include "ordst/error.hpp"
#include "ordst/parallel.hpp"

namespace ordst {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Eigen::MatrixXd residual_matrix(const Eigen::MatrixXd& x, const Eigen::VectorXd& delta) {
  Eigen::MatrixXd r = x;
  for (Eigen::Index t = 1; t < x.rows(); ++t) r.row(t) -= (delta.array() * x.row(t - 1).transpose().array()).matrix().transpose();
  return r;
}

Eigen::VectorXd draw_delta(const Eigen::MatrixXd& x, const Eigen::MatrixXd& sigma, const Eigen::VectorXd& prior_mean,
                           const Eigen::VectorXd& prior_var, Rng& rng) {
  const auto c = var_delta_conditional(x, sigma, prior_mean, prior_var);
  Eigen::VectorXd out;
  if (!mvn_canonical(rng, c.precision, c.linear, out))
    throw Error("E_NOT_PD", "VAR delta precision not positive definite");
  return out;
}

Eigen::MatrixXd draw_sigma(const Eigen::MatrixXd& x, const Eigen::VectorXd& delta, Rng& rng) {
  const auto iw = var_sigma_conditional(x, delta);
  Eigen::MatrixXd s = inverse_wishart(rng, iw.df, iw.scale);
  Eigen::LLT<Eigen::MatrixXd> check(s);
  if (check.info() != Eigen::Success) throw Error("E_NOT_PD", "inverse-Wishart draw not positive definite");
  return s;
}

double delta_icar_log_density(const VarSiteParams& p, std::size_t i, const VarState& state, const LatticeGraph& graph) {
  const auto nb = graph.neighbors(i);
  const double deg = static_cast<double>(nb.size());
  double lp = 0.0;
  for (Eigen::Index j = 0; j < p.delta.size(); ++j) {
    double s = 0.0;
    for (std::size_t k : nb) s += state.sites[k].delta(j);
    lp += normal_log_pdf(p.delta(j), s / deg, state.sigma2_delta(j) / deg);
  }
  return lp;
}

void update_delta_hyper(VarState& state, const LatticeGraph& graph, const HyperPrior& prior, Rng& rng) {
  std::vector<double> field(state.sites.size());
  for (Eigen::Index j = 0; j < state.sigma2_delta.size(); ++j) {
    for (std::size_t i = 0; i < field.size(); ++i) field[i] = state.sites[i].delta(j);
    const double shape = prior.shape + 0.5 * static_cast<double>(graph.size());
    const double scale = prior.scale + 0.5 * icar_pairwise_sum(field, graph);
    state.sigma2_delta(j) = inverse_gamma(rng, shape, scale);
  }
}

VarPosteriorStore empty_store(std::size_t n, std::size_t reserve) {
  VarPosteriorStore s;
  s.site_ids.resize(n);
  std::iota(s.site_ids.begin(), s.site_ids.end(), 1);
  s.draws.assign(n, {});
  for (auto& d : s.draws) d.reserve(reserve);
  return s;
}

}  // namespace

Eigen::RowVectorXd fourier_design_row(double t) {
  Eigen::RowVectorXd row(kFourierTerms);
  row(0) = 1.0;
  for (int k = 1; k <= kHarmonics; ++k) {
    const double arg = 2.0 * std::numbers::pi * k * t / kSeasonalPeriod;
    row(k) = std::sin(arg);
    row(kHarmonics + k) = std::cos(arg);
  }
  return row;
}

Eigen::RowVectorXd FourierFit::trend(double t) const { return fourier_design_row(t) * coef; }

DetrendResult fit_fourier_detrend(const Eigen::MatrixXd& series, int site_id) {
  const Eigen::Index t_len = series.rows();
  if (t_len < kFourierTerms + 1)
    throw Error("E_RANK_DEFICIENT", "site " + std::to_string(site_id) + ": seasonal fit needs at least " +
                                        std::to_string(kFourierTerms + 1) + " weeks, got " + std::to_string(t_len));
  if (!series.allFinite()) throw Error("E_PANEL", "site " + std::to_string(site_id) + ": non-finite covariate");
  Eigen::MatrixXd design(t_len, kFourierTerms);
  for (Eigen::Index t = 0; t < t_len; ++t) design.row(t) = fourier_design_row(static_cast<double>(t + 1));

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < kFourierTerms)
    throw Error("E_RANK_DEFICIENT", "site " + std::to_string(site_id) + ": seasonal design is rank deficient");
  DetrendResult out;
  out.fit.site_id = site_id;
  out.fit.coef = qr.solve(series);
  out.detrended = series - design * out.fit.coef;
  return out;
}

MvnCanonical var_delta_conditional(const Eigen::MatrixXd& x, const Eigen::MatrixXd& sigma,
                                   const Eigen::VectorXd& prior_mean, const Eigen::VectorXd& prior_var) {
  const Eigen::Index j = x.cols();
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw Error("E_NOT_PD", "VAR Sigma not positive definite");
  const Eigen::MatrixXd sigma_inv = llt.solve(Eigen::MatrixXd::Identity(j, j));

  Eigen::MatrixXd lagged_cross = Eigen::MatrixXd::Zero(j, j);
  Eigen::VectorXd linear = Eigen::VectorXd::Zero(j);
  for (Eigen::Index t = 1; t < x.rows(); ++t) {
    const Eigen::VectorXd prev = x.row(t - 1).transpose();
    lagged_cross.noalias() += prev * prev.transpose();
    linear.array() += prev.array() * (sigma_inv * x.row(t).transpose()).array();
  }
  MvnCanonical c;
  c.precision = sigma_inv.cwiseProduct(lagged_cross);
  c.precision.diagonal() += prior_var.cwiseInverse();
  c.linear = linear + prior_mean.cwiseQuotient(prior_var);
  return c;
}

InvWishartParams var_sigma_conditional(const Eigen::MatrixXd& x, const Eigen::VectorXd& delta) {
  const Eigen::Index j = x.cols();
  const Eigen::MatrixXd r = residual_matrix(x, delta);
  InvWishartParams p;
  p.df = static_cast<double>(j + x.rows());
  p.scale = Eigen::MatrixXd::Identity(j, j) + r.transpose() * r;
  return p;
}

double var_log_likelihood(const Eigen::MatrixXd& x, const VarSiteParams& params) {
  const Eigen::Index j = x.cols();
  Eigen::LLT<Eigen::MatrixXd> llt(params.sigma);
  if (llt.info() != Eigen::Success) throw Error("E_NOT_PD", "VAR Sigma not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  const Eigen::MatrixXd r = residual_matrix(x, params.delta);
  const Eigen::MatrixXd w = l.triangularView<Eigen::Lower>().solve(r.transpose());
  const double n = static_cast<double>(x.rows());
  return -0.5 * (n * (static_cast<double>(j) * kLog2Pi + log_det) + w.squaredNorm());
}

double inv_wishart_log_pdf(const Eigen::MatrixXd& sigma, double df, const Eigen::MatrixXd& scale) {
  const Eigen::Index j = sigma.rows();
  const double jd = static_cast<double>(j);
  Eigen::LLT<Eigen::MatrixXd> ls(sigma), lp(scale);
  const double log_det_s = 2.0 * Eigen::MatrixXd(ls.matrixL()).diagonal().array().log().sum();
  const double log_det_p = 2.0 * Eigen::MatrixXd(lp.matrixL()).diagonal().array().log().sum();
  double log_mgamma = jd * (jd - 1.0) / 4.0 * std::log(std::numbers::pi);
  for (Eigen::Index k = 1; k <= j; ++k) log_mgamma += std::lgamma(0.5 * df + 0.5 * (1.0 - static_cast<double>(k)));
  const double trace = ls.solve(scale).trace();
  return 0.5 * df * log_det_p - 0.5 * df * jd * std::log(2.0) - log_mgamma - 0.5 * (df + jd + 1.0) * log_det_s -
         0.5 * trace;
}

VarReservoir var_stage1_site(const Eigen::MatrixXd& x, int site_id, const ChainConfig& config, const VarPrior& prior,
                             Rng& rng) {
  config.validate();
  const Eigen::Index j = x.cols();
  if (x.rows() < j + 2)
    throw Error("E_PANEL", "site " + std::to_string(site_id) + ": VAR fit needs at least n_cov + 2 weeks");
  if (config.retained() == 0) throw Error("E_CONFIG", "VAR stage one must retain at least one draw");

  VarReservoir res;
  res.site_id = site_id;
  res.draws.reserve(config.retained());
  VarSiteParams state{Eigen::VectorXd::Zero(j), Eigen::MatrixXd::Identity(j, j)};
  const Eigen::VectorXd prior_mean = Eigen::VectorXd::Zero(j);
  const Eigen::VectorXd prior_var = Eigen::VectorXd::Constant(j, prior.delta_sd * prior.delta_sd);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    state.delta = draw_delta(x, state.sigma, prior_mean, prior_var, rng);
    state.sigma = draw_sigma(x, state.delta, rng);
    if (config.keeps(it)) {
      if ((state.delta.array().abs() >= 1.0).any()) ++res.explosive_draws;
      res.draws.push_back(state);
    }
  }
  return res;
}

VarStage1Result var_stage1_all(std::span<const Eigen::MatrixXd> detrended, std::span<const int> site_ids,
                               const ChainConfig& config, const VarPrior& prior, std::size_t workers) {
  if (detrended.size() != site_ids.size()) throw Error("E_SHAPE", "one site id per detrended series required");
  if (workers < 1) throw Error("E_CONFIG", "workers must be >= 1");
  std::vector<std::optional<VarReservoir>> slots(detrended.size());
  parallel_for(detrended.size(), workers, [&](std::size_t k) {
    Rng rng(derive_stream_seed(config.seed, static_cast<std::uint64_t>(site_ids[k])));
    slots[k] = var_stage1_site(detrended[k], site_ids[k], config, prior, rng);
  });
  VarStage1Result out;
  for (auto& s : slots) {
    if (s->explosive_draws > 0)
      out.warnings.push_back("W_EXPLOSIVE_VAR: site " + std::to_string(s->site_id) + " has " +
                             std::to_string(s->explosive_draws) + " draw(s) with |delta| >= 1");
    out.reservoirs.push_back(std::move(*s));
  }
  return out;
}

double var_log_acceptance_ratio(const VarSiteParams& proposed, const VarSiteParams& current, std::size_t i,
                                const VarState& state, const LatticeGraph& graph, const VarPrior& prior) {
  const double v = prior.delta_sd * prior.delta_sd;
  double lr = delta_icar_log_density(proposed, i, state, graph) - delta_icar_log_density(current, i, state, graph);
  for (Eigen::Index j = 0; j < proposed.delta.size(); ++j)
    lr += normal_log_pdf(current.delta(j), 0.0, v) - normal_log_pdf(proposed.delta(j), 0.0, v);
  return lr;
}

VarStage2Result var_stage2(std::span<const VarReservoir> reservoirs, const LatticeGraph& graph,
                           const VarStage2Config& config, const VarPrior& prior, Rng& rng) {
  config.chain.validate();
  const std::size_t n = graph.size();
  if (reservoirs.size() != n) throw Error("E_RESERVOIR", "expected one VAR reservoir per site");
  VarState state;
  for (std::size_t i = 0; i < n; ++i) {
    if (reservoirs[i].site_id != static_cast<int>(i + 1) || reservoirs[i].draws.empty())
      throw Error("E_RESERVOIR", "VAR reservoir " + std::to_string(i) + " missing or out of order");
    state.sites.push_back(reservoirs[i].draws.back());
  }
  state.sigma2_delta = Eigen::VectorXd::Ones(state.sites[0].delta.size());

  VarStage2Result out;
  out.stats = AcceptanceStats(n);
  out.store = empty_store(n, config.chain.retained());
  for (std::size_t it = 0; it < config.chain.iterations; ++it) {
    update_delta_hyper(state, graph, config.hyper_prior, rng);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& pool = reservoirs[i].draws;
      const VarSiteParams& proposal = pool[rng.index(pool.size())];
      const double log_r = var_log_acceptance_ratio(proposal, state.sites[i], i, state, graph, prior);
      ++out.stats.proposed[i];
      if (log_r >= 0.0 || std::log(rng.uniform_open()) < log_r) {
        state.sites[i] = proposal;
        ++out.stats.accepted[i];
      }
    }
    if (config.chain.keeps(it)) {
      for (std::size_t i = 0; i < n; ++i) out.store.draws[i].push_back(state.sites[i]);
      out.store.hyper.push_back(state.sigma2_delta);
      out.store.iterations.push_back(it + 1);
    }
  }
  return out;
}

VarPosteriorStore var_single_stage(std::span<const Eigen::MatrixXd> detrended, const LatticeGraph& graph,
                                   const VarStage2Config& config, Rng& rng) {
  config.chain.validate();
  const std::size_t n = graph.size();
  if (detrended.size() != n) throw Error("E_SHAPE", "expected one detrended series per site");
  const Eigen::Index j = detrended[0].cols();
  VarState state;
  state.sites.assign(n, VarSiteParams{Eigen::VectorXd::Zero(j), Eigen::MatrixXd::Identity(j, j)});
  state.sigma2_delta = Eigen::VectorXd::Ones(j);

  VarPosteriorStore store = empty_store(n, config.chain.retained());
  Eigen::VectorXd mean(j), var(j);
  for (std::size_t it = 0; it < config.chain.iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto nb = graph.neighbors(i);
      const double deg = static_cast<double>(nb.size());
      for (Eigen::Index k = 0; k < j; ++k) {
        double s = 0.0;
        for (std::size_t l : nb) s += state.sites[l].delta(k);
        mean(k) = s / deg;
        var(k) = state.sigma2_delta(k) / deg;
      }
      state.sites[i].delta = draw_delta(detrended[i], state.sites[i].sigma, mean, var, rng);
      state.sites[i].sigma = draw_sigma(detrended[i], state.sites[i].delta, rng);
    }
    update_delta_hyper(state, graph, config.hyper_prior, rng);
    if (config.chain.keeps(it)) {
      for (std::size_t i = 0; i < n; ++i) store.draws[i].push_back(state.sites[i]);
      store.hyper.push_back(state.sigma2_delta);
      store.iterations.push_back(it + 1);
    }
  }
  return store;
}

CovariatePath simulate_var_forward(const Eigen::VectorXd& last, const VarSiteParams& params, std::size_t horizon,
                                   const FourierFit& fit, double t_last, Rng& rng) {
  if (horizon < 1) throw Error("E_HORIZON", "forecast horizon must be >= 1");
  const Eigen::Index j = last.size();
  Eigen::LLT<Eigen::MatrixXd> llt(params.sigma);
  if (llt.info() != Eigen::Success) throw Error("E_NOT_PD", "VAR Sigma not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();

  CovariatePath path;
  path.detrended.resize(static_cast<Eigen::Index>(horizon), j);
  path.covariates.resize(static_cast<Eigen::Index>(horizon), j);
  Eigen::VectorXd prev = last, eps(j);
  for (std::size_t h = 0; h < horizon; ++h) {
    for (Eigen::Index k = 0; k < j; ++k) eps(k) = rng.normal();
    const Eigen::VectorXd next = params.delta.cwiseProduct(prev) + l * eps;
    const auto hi = static_cast<Eigen::Index>(h);
    path.detrended.row(hi) = next.transpose();
    path.covariates.row(hi) = next.transpose() + fit.trend(t_last + static_cast<double>(h + 1));
    prev = next;
  }
  return path;
}

}  // namespace ordst
