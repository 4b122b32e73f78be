#pragma once

#include <span>
#include <string>
#include <vector>

#include "ordst/lattice.hpp"
#include "ordst/model.hpp"
#include "ordst/random.hpp"
#include "ordst/stage1.hpp"
#include "ordst/state.hpp"

namespace ordst {

/// Full conditional IG of a spatial variance given its field:
/// IG(shape + I/2, scale + sum_{i~j} (v_i - v_j)^2 / 2).
InvGammaParams hypervariance_conditional(std::span<const double> field, const LatticeGraph& graph,
                                         const HyperPrior& prior);
double gibbs_update_hypervariance(std::span<const double> field, const LatticeGraph& graph,
                                  const HyperPrior& prior, Rng& rng);

/// Redraws sigma2_gamma and every sigma2_beta(p) from their conditionals.
void update_hyperparams(FullModelState& state, const LatticeGraph& graph, const HyperPrior& prior, Rng& rng);

/// Log acceptance ratio for swapping site i's record from `current` to
/// `proposed` when the proposal is the stage-one posterior. Only the ICAR
/// conditionals and the stage-one beta/gamma priors survive; the latent
/// series, the data and the sigma2 prior cancel.
double log_acceptance_ratio(const SiteParams& proposed, const SiteParams& current, std::size_t i,
                            const FullModelState& state, const LatticeGraph& graph, const Stage1Prior& prior);

struct MhOutcome {
  bool accepted = false;
  std::size_t proposal_index = 0;
};

/// Independence MH step: propose a reservoir record uniformly with
/// replacement; on acceptance the whole (z, beta, gamma, sigma2) record
/// replaces state.sites[i].
MhOutcome mh_update_site(std::size_t i, FullModelState& state, const Reservoir& reservoir, const LatticeGraph& graph,
                         const Stage1Prior& prior, Rng& rng);

struct Stage2Config {
  ChainConfig chain;
  HyperPrior hyper_prior;
  bool random_scan = false;
  double low_acceptance_alarm = 0.01;
};

struct Stage2Result {
  PosteriorStore store;
  AcceptanceStats stats;
  FullModelState final_state;
  std::vector<std::string> warnings;
  /// record_index[i][m]: reservoir row held by site i at retained draw m.
  std::vector<std::vector<std::size_t>> record_index;
};

/// Metropolis-within-Gibbs over the spatial model. reservoirs[i] must hold
/// site_id i + 1. Each iteration first redraws the hyperparameters, then
/// visits sites in ascending id order (or a fresh random permutation when
/// random_scan is set) so neighbours already visited contribute their new
/// values.
Stage2Result run_stage2(std::span<const Reservoir> reservoirs, const LatticeGraph& graph, const Stage2Config& config,
                        const Stage1Prior& prior, Rng& rng);

}  // namespace ordst
