#include "ordst/stage2.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ordst/error.hpp"

namespace ordst {

namespace {

double stage1_beta_gamma_log_prior(const SiteParams& p, const Stage1Prior& prior) {
  double lp = logistic_log_pdf(p.gamma);
  for (Eigen::Index k = 0; k < p.beta.size(); ++k) lp += normal_log_pdf(p.beta(k), 0.0, prior.xi(k) * prior.xi(k));
  return lp;
}

}  // namespace

InvGammaParams hypervariance_conditional(std::span<const double> field, const LatticeGraph& graph,
                                         const HyperPrior& prior) {
  return {prior.shape + 0.5 * static_cast<double>(graph.size()),
          prior.scale + 0.5 * icar_pairwise_sum(field, graph)};
}

double gibbs_update_hypervariance(std::span<const double> field, const LatticeGraph& graph,
                                  const HyperPrior& prior, Rng& rng) {
  const auto ig = hypervariance_conditional(field, graph, prior);
  return inverse_gamma(rng, ig.shape, ig.scale);
}

void update_hyperparams(FullModelState& state, const LatticeGraph& graph, const HyperPrior& prior, Rng& rng) {
  state.hyper.sigma2_gamma = gibbs_update_hypervariance(state.gamma_field(), graph, prior, rng);
  for (Eigen::Index p = 0; p < state.hyper.sigma2_beta.size(); ++p)
    state.hyper.sigma2_beta(p) = gibbs_update_hypervariance(state.beta_field(p), graph, prior, rng);
}

double log_acceptance_ratio(const SiteParams& proposed, const SiteParams& current, std::size_t i,
                            const FullModelState& state, const LatticeGraph& graph, const Stage1Prior& prior) {
  return icar_conditional_log_density(proposed, i, state, graph) -
         icar_conditional_log_density(current, i, state, graph) + stage1_beta_gamma_log_prior(current, prior) -
         stage1_beta_gamma_log_prior(proposed, prior);
}

MhOutcome mh_update_site(std::size_t i, FullModelState& state, const Reservoir& reservoir, const LatticeGraph& graph,
                         const Stage1Prior& prior, Rng& rng) {
  if (reservoir.draws.empty())
    throw Error("E_EMPTY_RESERVOIR", "site " + std::to_string(i + 1) + " has an empty reservoir");
  MhOutcome out;
  out.proposal_index = rng.index(reservoir.draws.size());
  const SiteParams& proposal = reservoir.draws[out.proposal_index];
  const double log_r = log_acceptance_ratio(proposal, state.sites[i], i, state, graph, prior);
  if (log_r >= 0.0 || std::log(rng.uniform_open()) < log_r) {
    state.sites[i] = proposal;
    out.accepted = true;
  }
  return out;
}

Stage2Result run_stage2(std::span<const Reservoir> reservoirs, const LatticeGraph& graph, const Stage2Config& config,
                        const Stage1Prior& prior, Rng& rng) {
  config.chain.validate();
  const std::size_t n = graph.size();
  if (reservoirs.size() != n)
    throw Error("E_RESERVOIR", "expected " + std::to_string(n) + " reservoirs, got " + std::to_string(reservoirs.size()));
  for (std::size_t i = 0; i < n; ++i) {
    if (reservoirs[i].site_id != static_cast<int>(i + 1))
      throw Error("E_RESERVOIR", "reservoir " + std::to_string(i) + " holds site " +
                                     std::to_string(reservoirs[i].site_id) + ", expected " + std::to_string(i + 1));
    if (reservoirs[i].draws.empty())
      throw Error("E_EMPTY_RESERVOIR", "site " + std::to_string(i + 1) + " has an empty reservoir");
  }
  const std::size_t n_coef = static_cast<std::size_t>(reservoirs[0].draws.back().beta.size());
  prior.validate(n_coef);

  Stage2Result out;
  out.stats = AcceptanceStats(n);
  FullModelState& state = out.final_state;
  std::vector<std::size_t> current(n);
  for (std::size_t i = 0; i < n; ++i) {
    current[i] = reservoirs[i].draws.size() - 1;
    state.sites.push_back(reservoirs[i].draws.back());
  }
  state.hyper = HyperParams::ones(n_coef);

  out.store.site_ids.resize(n);
  std::iota(out.store.site_ids.begin(), out.store.site_ids.end(), 1);
  out.store.draws.assign(n, {});
  out.record_index.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    out.store.draws[i].reserve(config.chain.retained());
    out.record_index[i].reserve(config.chain.retained());
  }

  AcceptanceStats after_burn(n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t it = 0; it < config.chain.iterations; ++it) {
    update_hyperparams(state, graph, config.hyper_prior, rng);
    if (config.random_scan) {
      for (std::size_t k = n; k > 1; --k) std::swap(order[k - 1], order[rng.index(k)]);
    }
    for (std::size_t i : order) {
      const auto mh = mh_update_site(i, state, reservoirs[i], graph, prior, rng);
      ++out.stats.proposed[i];
      if (mh.accepted) {
        ++out.stats.accepted[i];
        current[i] = mh.proposal_index;
      }
      if (it >= config.chain.burn_in) {
        ++after_burn.proposed[i];
        if (mh.accepted) ++after_burn.accepted[i];
      }
    }
    state.iteration = it + 1;
    if (config.chain.keeps(it)) {
      for (std::size_t i = 0; i < n; ++i) {
        out.store.draws[i].push_back(state.sites[i]);
        out.record_index[i].push_back(current[i]);
      }
      out.store.hyper.push_back(state.hyper);
      out.store.iterations.push_back(it + 1);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (after_burn.proposed[i] > 0 && after_burn.rate(i) < config.low_acceptance_alarm)
      out.warnings.push_back("W_LOW_ACCEPTANCE: site " + std::to_string(i + 1) + " accepted " +
                             std::to_string(after_burn.accepted[i]) + " of " + std::to_string(after_burn.proposed[i]) +
                             " stage-two proposals after burn-in");
  }
  return out;
}

}  // namespace ordst
