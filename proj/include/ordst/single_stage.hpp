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

/// Reference sampler that targets the spatial posterior directly. It exists
/// to validate the two-stage pipeline and is only practical at desk scale.
struct SingleStageConfig {
  ChainConfig chain;
  HyperPrior hyper_prior;
  double sigma2_shape = 0.5;  // IG prior on each site's sigma2
  double sigma2_scale = 0.5;
  double initial_step = 1.0;  // random-walk sd for gamma
  double target_acceptance = 0.4;
  std::size_t adapt_window = 50;
  bool force = false;          // bypass the I*T size guard
  /// Adds ridge*I to the ICAR precision (D - A). Zero gives the intrinsic
  /// model; a positive value makes the prior proper, which joint-distribution
  /// tests need.
  double icar_ridge = 0.0;
};

inline constexpr std::size_t kSingleStageMaxCells = 1'000'000;

/// Spatial prior moments for field value at site i: neighbour sum over
/// (degree + ridge), variance over (degree + ridge).
NormalMoments ridge_icar_conditional(std::span<const double> values, std::size_t i, double variance,
                                     const LatticeGraph& graph, double ridge);

/// Conjugate beta_i draw with N(neighbour mean_p, sigma2_(p) / a_{i+}) priors.
Eigen::VectorXd gibbs_update_beta_icar(std::size_t i, const FullModelState& state, const SitePanel& panel,
                                       const LatticeGraph& graph, Rng& rng, double ridge = 0.0);

/// Random-walk MH on gamma_i targeting AR(1) likelihood x ICAR conditional.
/// Returns true when the move was accepted.
bool mh_update_gamma_icar(std::size_t i, FullModelState& state, const SitePanel& panel, const LatticeGraph& graph,
                          double step, Rng& rng, double ridge = 0.0);

/// Spatial variance draws; with ridge > 0 the scale gains ridge * sum v^2 / 2.
void update_hyperparams_ridge(FullModelState& state, const LatticeGraph& graph, const HyperPrior& prior,
                              double ridge, Rng& rng);

/// One full sweep: per site z, beta, gamma, sigma2, then the spatial
/// variances. Returns the gamma acceptance flag of each site.
std::vector<bool> single_stage_sweep(FullModelState& state, std::span<const SitePanel> panels, const Cutoffs& cutoffs,
                                     const LatticeGraph& graph, const SingleStageConfig& config,
                                     std::span<const double> gamma_step, Rng& rng);

struct SingleStageResult {
  PosteriorStore store;
  FullModelState final_state;
  std::vector<double> gamma_step;             // final (frozen) step per site
  AcceptanceStats gamma_acceptance;           // post-burn-in gamma MH counts
  std::vector<std::string> warnings;
};

/// Per iteration: for each site z, beta, gamma, sigma2; then the spatial
/// variances. The gamma step adapts toward target_acceptance during burn-in
/// only.
SingleStageResult run_single_stage(std::span<const SitePanel> panels, const Cutoffs& cutoffs,
                                   const LatticeGraph& graph, const SingleStageConfig& config, Rng& rng);

}  // namespace ordst
