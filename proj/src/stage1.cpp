#include "ordst/stage1.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "ordst/error.hpp"
#include "ordst/parallel.hpp"

namespace ordst {

namespace {

// Smallest/largest doubles strictly inside (0, 1); keeps logit finite.
const double kRhoMin = std::nextafter(0.0, 1.0);
const double kRhoMax = std::nextafter(1.0, 0.0);

std::string column_name(Eigen::Index k) { return k == 0 ? "intercept" : "x" + std::to_string(k); }

// Quasi-differenced design and response: row 1 unchanged, row t > 1 is
// (row_t - rho row_{t-1}).
void whiten(const SitePanel& panel, const Eigen::VectorXd& z, double rho, Eigen::MatrixXd& w, Eigen::VectorXd& r) {
  const Eigen::Index t_len = panel.x.rows();
  w.resize(t_len, panel.x.cols());
  r.resize(t_len);
  w.row(0) = panel.x.row(0);
  r(0) = z(0);
  for (Eigen::Index t = 1; t < t_len; ++t) {
    w.row(t) = panel.x.row(t) - rho * panel.x.row(t - 1);
    r(t) = z(t) - rho * z(t - 1);
  }
}

}  // namespace

void ChainConfig::validate() const {
  if (thin < 1) throw Error("E_CONFIG", "thin must be >= 1");
  if (iterations == 0 && burn_in == 0) return;  // empty run
  if (burn_in >= iterations) throw Error("E_CONFIG", "burn_in must be smaller than iterations");
}

std::size_t ChainConfig::retained() const {
  if (iterations <= burn_in) return 0;
  return (iterations - burn_in + thin - 1) / thin;
}

std::optional<std::string> ChainConfig::retention_warning() const {
  if (retained() >= 100) return std::nullopt;
  return "W_FEW_DRAWS: only " + std::to_string(retained()) + " draws retained (fewer than 100)";
}

SiteParams initial_site_params(const SitePanel& panel, const Cutoffs& cutoffs) {
  SiteParams p;
  p.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(panel.n_coef()));
  p.gamma = 0.0;
  p.sigma2 = 1.0;
  p.z.resize(static_cast<Eigen::Index>(panel.length()));
  for (std::size_t t = 0; t < panel.length(); ++t) {
    const auto b = latent_bounds(panel.y[t], cutoffs);
    double v;
    if (std::isinf(b.lower) && std::isinf(b.upper)) v = 0.0;
    else if (std::isinf(b.lower)) v = b.upper - 0.5;
    else if (std::isinf(b.upper)) v = b.lower + 0.5;
    else v = 0.5 * (b.lower + b.upper);
    p.z(static_cast<Eigen::Index>(t)) = v;
  }
  return p;
}

namespace {

// Conditional moments of d_t = z_t - mu_t given the other residuals.
NormalMoments residual_conditional(const Eigen::VectorXd& d, Eigen::Index t, double rho, double sigma2) {
  const Eigen::Index t_len = d.size();
  const double one_plus = 1.0 + rho * rho;
  if (t_len == 1) return {0.0, sigma2};
  if (t == 0) return {rho * d(1) / one_plus, sigma2 / one_plus};
  if (t == t_len - 1) return {rho * d(t - 1), sigma2};
  return {rho * (d(t - 1) + d(t + 1)) / one_plus, sigma2 / one_plus};
}

}  // namespace

NormalMoments z_conditional(const SiteParams& params, const SitePanel& panel, std::size_t t) {
  const Eigen::VectorXd mu = panel.x * params.beta;
  const Eigen::VectorXd d = params.z - mu;
  const auto ti = static_cast<Eigen::Index>(t);
  auto m = residual_conditional(d, ti, params.rho(), params.sigma2);
  m.mean += mu(ti);
  return m;
}

Eigen::VectorXd gibbs_update_z(const SiteParams& params, const SitePanel& panel, const Cutoffs& cutoffs,
                               Rng& rng) {
  const Eigen::Index t_len = params.z.size();
  const Eigen::VectorXd mu = panel.x * params.beta;
  Eigen::VectorXd d = params.z - mu;
  const double rho = params.rho();

  for (Eigen::Index t = 0; t < t_len; ++t) {
    const auto m = residual_conditional(d, t, rho, params.sigma2);
    const auto b = latent_bounds(panel.y[static_cast<std::size_t>(t)], cutoffs);
    const double z = truncated_normal(rng, mu(t) + m.mean, std::sqrt(m.var), b.lower, b.upper);
    d(t) = z - mu(t);
  }
  return d + mu;
}

BetaConditional beta_conditional(const SiteParams& params, const SitePanel& panel,
                                 const Eigen::VectorXd& prior_mean, const Eigen::VectorXd& prior_var) {
  Eigen::MatrixXd w;
  Eigen::VectorXd r;
  whiten(panel, params.z, params.rho(), w, r);

  const Eigen::MatrixXd gram = w.transpose() * w;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
  qr.setThreshold(1e-10);
  if (qr.rank() < gram.cols()) {
    std::string cols;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < gram.cols(); ++k) {
      if (!cols.empty()) cols += ", ";
      cols += column_name(perm(k));
    }
    throw Error("E_RANK_DEFICIENT", "site " + std::to_string(panel.site_id) +
                                        ": whitened design is rank deficient; collinear column(s): " + cols);
  }

  Eigen::MatrixXd precision = gram / params.sigma2;
  precision.diagonal() += prior_var.cwiseInverse();
  const Eigen::VectorXd linear = w.transpose() * r / params.sigma2 + prior_mean.cwiseQuotient(prior_var);
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success)
    throw Error("E_RANK_DEFICIENT", "site " + std::to_string(panel.site_id) + ": beta precision not positive definite");
  const Eigen::Index k = precision.rows();
  return {llt.solve(linear), llt.solve(Eigen::MatrixXd::Identity(k, k))};
}

Eigen::VectorXd draw_beta(const SiteParams& params, const SitePanel& panel, const Eigen::VectorXd& prior_mean,
                          const Eigen::VectorXd& prior_var, Rng& rng) {
  const auto cond = beta_conditional(params, panel, prior_mean, prior_var);
  Eigen::LLT<Eigen::MatrixXd> llt(cond.cov);
  Eigen::VectorXd eps(cond.mean.size());
  for (Eigen::Index k = 0; k < eps.size(); ++k) eps(k) = rng.normal();
  return cond.mean + llt.matrixL() * eps;
}

Eigen::VectorXd gibbs_update_beta(const SiteParams& params, const SitePanel& panel, const Stage1Prior& prior,
                                  Rng& rng) {
  return draw_beta(params, panel, Eigen::VectorXd::Zero(prior.xi.size()), prior.xi.array().square().matrix(), rng);
}

RhoConditional rho_conditional(const SiteParams& params, const SitePanel& panel) {
  const Eigen::VectorXd d = params.z - panel.x * params.beta;
  double cross = 0.0, lagged = 0.0;
  for (Eigen::Index t = 1; t < d.size(); ++t) {
    cross += d(t) * d(t - 1);
    lagged += d(t - 1) * d(t - 1);
  }
  if (!(lagged > 0.0)) return {0.0, 0.0, true};
  return {cross / lagged, params.sigma2 / lagged, false};
}

RhoDraw gibbs_update_rho(const SiteParams& params, const SitePanel& panel, Rng& rng) {
  const auto c = rho_conditional(params, panel);
  double rho = c.degenerate ? rng.uniform_open() : truncated_normal(rng, c.mean, std::sqrt(c.var), 0.0, 1.0);
  rho = std::clamp(rho, kRhoMin, kRhoMax);
  return {logit(rho), c.degenerate};
}

InvGammaParams sigma2_conditional(const SiteParams& params, const SitePanel& panel, double prior_shape,
                                  double prior_scale) {
  const Eigen::VectorXd e = ar1_residuals(params.z, params.beta, params.gamma, panel.x);
  return {prior_shape + 0.5 * static_cast<double>(e.size()), prior_scale + 0.5 * e.squaredNorm()};
}

double gibbs_update_sigma2(const SiteParams& params, const SitePanel& panel, const Stage1Prior& prior,
                           Rng& rng) {
  const auto ig = sigma2_conditional(params, panel, prior.ig_shape, prior.ig_scale);
  return inverse_gamma(rng, ig.shape, ig.scale);
}

Reservoir run_stage1_site(const SitePanel& panel, const Cutoffs& cutoffs, const Stage1Prior& prior,
                          const ChainConfig& config, Rng& rng) {
  panel.validate(cutoffs);
  prior.validate(panel.n_coef());
  config.validate();
  if (config.retained() == 0) throw Error("E_CONFIG", "stage one must retain at least one draw");

  Reservoir res;
  res.site_id = panel.site_id;
  res.draws.reserve(config.retained());

  SiteParams state = initial_site_params(panel, cutoffs);
  const Eigen::VectorXd prior_mean = Eigen::VectorXd::Zero(prior.xi.size());
  const Eigen::VectorXd prior_var = prior.xi.array().square().matrix();
  for (std::size_t it = 0; it < config.iterations; ++it) {
    state.z = gibbs_update_z(state, panel, cutoffs, rng);
    state.beta = draw_beta(state, panel, prior_mean, prior_var, rng);
    const auto rd = gibbs_update_rho(state, panel, rng);
    state.gamma = rd.gamma;
    if (rd.prior_fallback) ++res.rho_fallbacks;
    state.sigma2 = gibbs_update_sigma2(state, panel, prior, rng);
    if (config.keeps(it)) res.draws.push_back(state);
  }
  return res;
}

Stage1Result run_stage1_all(std::span<const SitePanel> panels, const Cutoffs& cutoffs, const Stage1Prior& prior,
                            const ChainConfig& config, std::size_t workers) {
  if (workers < 1) throw Error("E_CONFIG", "workers must be >= 1");
  config.validate();

  std::vector<std::optional<Reservoir>> slots(panels.size());
  std::vector<std::optional<SiteFailure>> errors(panels.size());
  parallel_for(panels.size(), workers, [&](std::size_t k) {
    const auto& panel = panels[k];
    try {
      Rng rng(derive_stream_seed(config.seed, static_cast<std::uint64_t>(panel.site_id)));
      slots[k] = run_stage1_site(panel, cutoffs, prior, config, rng);
    } catch (const Error& e) {
      errors[k] = SiteFailure{panel.site_id, e.code(), e.what()};
    } catch (const std::exception& e) {
      errors[k] = SiteFailure{panel.site_id, "E_INTERNAL", e.what()};
    }
  });

  Stage1Result out;
  if (auto w = config.retention_warning()) out.warnings.push_back(*w);
  for (std::size_t k = 0; k < panels.size(); ++k) {
    if (slots[k]) {
      if (slots[k]->rho_fallbacks > 0)
        out.warnings.push_back("W_RHO_PRIOR_FALLBACK: site " + std::to_string(slots[k]->site_id) + " drew rho from its prior " +
                               std::to_string(slots[k]->rho_fallbacks) + " time(s)");
      out.reservoirs.push_back(std::move(*slots[k]));
    }
    if (errors[k]) out.failures.push_back(std::move(*errors[k]));
  }
  return out;
}

}  // namespace ordst
