#include "ordst/single_stage.hpp"

#include <cmath>
#include <numeric>

#include "ordst/error.hpp"
#include "ordst/stage2.hpp"

namespace ordst {

NormalMoments ridge_icar_conditional(std::span<const double> values, std::size_t i, double variance,
                                     const LatticeGraph& graph, double ridge) {
  if (ridge == 0.0) return icar_conditional(values, i, variance, graph);
  const auto nb = graph.neighbors(i);
  double s = 0.0;
  for (std::size_t j : nb) s += values[j];
  const double w = static_cast<double>(nb.size()) + ridge;
  return {s / w, variance / w};
}

Eigen::VectorXd gibbs_update_beta_icar(std::size_t i, const FullModelState& state, const SitePanel& panel,
                                       const LatticeGraph& graph, Rng& rng, double ridge) {
  const Eigen::Index k = state.sites[i].beta.size();
  Eigen::VectorXd mean(k), var(k);
  for (Eigen::Index p = 0; p < k; ++p) {
    const auto field = state.beta_field(p);
    const auto c = ridge_icar_conditional(field, i, state.hyper.sigma2_beta(p), graph, ridge);
    mean(p) = c.mean;
    var(p) = c.var;
  }
  return draw_beta(state.sites[i], panel, mean, var, rng);
}

bool mh_update_gamma_icar(std::size_t i, FullModelState& state, const SitePanel& panel, const LatticeGraph& graph,
                          double step, Rng& rng, double ridge) {
  if (!(step > 0.0)) throw Error("E_CONFIG", "gamma step must be positive");
  SiteParams& site = state.sites[i];
  const auto field = state.gamma_field();
  const auto prior = ridge_icar_conditional(field, i, state.hyper.sigma2_gamma, graph, ridge);

  const double proposal = site.gamma + step * rng.normal();
  auto log_target = [&](double g) {
    return ar1_log_density(site.z, site.beta, g, site.sigma2, panel.x) + normal_log_pdf(g, prior.mean, prior.var);
  };
  const double log_r = log_target(proposal) - log_target(site.gamma);
  if (log_r >= 0.0 || std::log(rng.uniform_open()) < log_r) {
    site.gamma = proposal;
    return true;
  }
  return false;
}

void update_hyperparams_ridge(FullModelState& state, const LatticeGraph& graph, const HyperPrior& prior,
                              double ridge, Rng& rng) {
  if (ridge == 0.0) {
    update_hyperparams(state, graph, prior, rng);
    return;
  }
  auto draw = [&](const std::vector<double>& field) {
    double sq = 0.0;
    for (double v : field) sq += v * v;
    const auto ig = hypervariance_conditional(field, graph, prior);
    return inverse_gamma(rng, ig.shape, ig.scale + 0.5 * ridge * sq);
  };
  state.hyper.sigma2_gamma = draw(state.gamma_field());
  for (Eigen::Index p = 0; p < state.hyper.sigma2_beta.size(); ++p)
    state.hyper.sigma2_beta(p) = draw(state.beta_field(p));
}

std::vector<bool> single_stage_sweep(FullModelState& state, std::span<const SitePanel> panels, const Cutoffs& cutoffs,
                                     const LatticeGraph& graph, const SingleStageConfig& config,
                                     std::span<const double> gamma_step, Rng& rng) {
  const std::size_t n = state.sites.size();
  std::vector<bool> accepted(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    SiteParams& site = state.sites[i];
    site.z = gibbs_update_z(site, panels[i], cutoffs, rng);
    site.beta = gibbs_update_beta_icar(i, state, panels[i], graph, rng, config.icar_ridge);
    accepted[i] = mh_update_gamma_icar(i, state, panels[i], graph, gamma_step[i], rng, config.icar_ridge);
    const auto ig = sigma2_conditional(site, panels[i], config.sigma2_shape, config.sigma2_scale);
    site.sigma2 = inverse_gamma(rng, ig.shape, ig.scale);
  }
  update_hyperparams_ridge(state, graph, config.hyper_prior, config.icar_ridge, rng);
  return accepted;
}

SingleStageResult run_single_stage(std::span<const SitePanel> panels, const Cutoffs& cutoffs,
                                   const LatticeGraph& graph, const SingleStageConfig& config, Rng& rng) {
  config.chain.validate();
  const std::size_t n = graph.size();
  if (panels.size() != n)
    throw Error("E_SHAPE", "expected " + std::to_string(n) + " panels, got " + std::to_string(panels.size()));
  std::size_t cells = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (panels[i].site_id != static_cast<int>(i + 1))
      throw Error("E_SHAPE", "panels must be ordered by site id");
    panels[i].validate(cutoffs);
    cells += panels[i].length();
  }
  if (cells > kSingleStageMaxCells && !config.force)
    throw Error("E_SIZE_GUARD", "single-stage run over " + std::to_string(cells) + " site-weeks exceeds " +
                                    std::to_string(kSingleStageMaxCells) + "; pass --force to run anyway");
  if (config.icar_ridge < 0.0) throw Error("E_CONFIG", "icar_ridge must be non-negative");

  SingleStageResult out;
  FullModelState& state = out.final_state;
  for (const auto& panel : panels) state.sites.push_back(initial_site_params(panel, cutoffs));
  const std::size_t n_coef = panels[0].n_coef();
  state.hyper = HyperParams::ones(n_coef);

  out.store.site_ids.resize(n);
  std::iota(out.store.site_ids.begin(), out.store.site_ids.end(), 1);
  out.store.draws.assign(n, {});
  for (auto& d : out.store.draws) d.reserve(config.chain.retained());
  out.gamma_step.assign(n, config.initial_step);
  out.gamma_acceptance = AcceptanceStats(n);
  std::vector<std::size_t> window_accepts(n, 0);

  for (std::size_t it = 0; it < config.chain.iterations; ++it) {
    const bool burning = it < config.chain.burn_in;
    const auto acc = single_stage_sweep(state, panels, cutoffs, graph, config, out.gamma_step, rng);
    for (std::size_t i = 0; i < n; ++i) {
      if (burning) {
        window_accepts[i] += acc[i] ? 1 : 0;
      } else {
        ++out.gamma_acceptance.proposed[i];
        out.gamma_acceptance.accepted[i] += acc[i] ? 1 : 0;
      }
    }

    if (burning && config.adapt_window > 0 && (it + 1) % config.adapt_window == 0) {
      for (std::size_t i = 0; i < n; ++i) {
        const double rate = static_cast<double>(window_accepts[i]) / static_cast<double>(config.adapt_window);
        out.gamma_step[i] *= std::exp(rate - config.target_acceptance);
        window_accepts[i] = 0;
      }
    }
    state.iteration = it + 1;
    if (config.chain.keeps(it)) {
      for (std::size_t i = 0; i < n; ++i) out.store.draws[i].push_back(state.sites[i]);
      out.store.hyper.push_back(state.hyper);
      out.store.iterations.push_back(it + 1);
    }
  }
  if (auto w = config.chain.retention_warning()) out.warnings.push_back(*w);
  return out;
}

}  // namespace ordst
