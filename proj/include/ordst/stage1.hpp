#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ordst/lattice.hpp"
#include "ordst/model.hpp"
#include "ordst/random.hpp"

namespace ordst {

/// Chain length bookkeeping shared by every sampler.
struct ChainConfig {
  std::size_t iterations = 1000;
  std::size_t burn_in = 0;
  std::size_t thin = 1;
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t retained() const;
  bool keeps(std::size_t iteration) const {
    return iteration >= burn_in && (iteration - burn_in) % thin == 0;
  }
  /// Set when fewer than 100 draws would be retained.
  std::optional<std::string> retention_warning() const;
};

/// Thinned stage-one draws for one site; the stage-two proposal pool.
struct Reservoir {
  int site_id = 0;
  std::vector<SiteParams> draws;
  std::size_t rho_fallbacks = 0;  // iterations where rho was drawn from its prior

  std::size_t size() const noexcept { return draws.size(); }
};

struct BetaConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

struct RhoConditional {
  double mean = 0.0;
  double var = 0.0;
  bool degenerate = false;  // no lagged residual signal; use the U(0,1) prior
};

struct InvGammaParams {
  double shape = 0.0;
  double scale = 0.0;
};

/// Deterministic starting point: beta = 0, rho = 0.5, sigma2 = 1, z at the
/// midpoint of each finite latent interval (or 0.5 inside a one-sided one).
SiteParams initial_site_params(const SitePanel& panel, const Cutoffs& cutoffs);

/// Untruncated conditional of z_t given the rest of the series and theta;
/// the Gibbs update truncates it to latent_bounds(y_t).
NormalMoments z_conditional(const SiteParams& params, const SitePanel& panel, std::size_t t);

/// One systematic sweep of single-site truncated-normal updates of z_1..z_T.
Eigen::VectorXd gibbs_update_z(const SiteParams& params, const SitePanel& panel, const Cutoffs& cutoffs,
                               Rng& rng);

/// Conjugate normal conditional of beta under the quasi-differenced AR(1)
/// regression with independent N(prior_mean_p, prior_var_p) priors.
/// Throws E_RANK_DEFICIENT naming collinear columns.
BetaConditional beta_conditional(const SiteParams& params, const SitePanel& panel,
                                 const Eigen::VectorXd& prior_mean, const Eigen::VectorXd& prior_var);
Eigen::VectorXd draw_beta(const SiteParams& params, const SitePanel& panel, const Eigen::VectorXd& prior_mean,
                          const Eigen::VectorXd& prior_var, Rng& rng);
Eigen::VectorXd gibbs_update_beta(const SiteParams& params, const SitePanel& panel, const Stage1Prior& prior,
                                  Rng& rng);

RhoConditional rho_conditional(const SiteParams& params, const SitePanel& panel);

struct RhoDraw {
  double gamma = 0.0;
  bool prior_fallback = false;
};
/// rho | rest is N(m, v) truncated to (0, 1); the stored value is logit(rho).
RhoDraw gibbs_update_rho(const SiteParams& params, const SitePanel& panel, Rng& rng);

InvGammaParams sigma2_conditional(const SiteParams& params, const SitePanel& panel, double prior_shape,
                                  double prior_scale);
double gibbs_update_sigma2(const SiteParams& params, const SitePanel& panel, const Stage1Prior& prior,
                           Rng& rng);

/// Systematic-scan Gibbs (z, beta, rho, sigma2) under the independence prior.
Reservoir run_stage1_site(const SitePanel& panel, const Cutoffs& cutoffs, const Stage1Prior& prior,
                          const ChainConfig& config, Rng& rng);

struct SiteFailure {
  int site_id = 0;
  std::string code;
  std::string message;
};

struct Stage1Result {
  std::vector<Reservoir> reservoirs;  // in input order, successful sites only
  std::vector<SiteFailure> failures;
  std::vector<std::string> warnings;
};

/// Fits every site independently on a pool of `workers` threads. Site i uses
/// the stream derive_stream_seed(config.seed, site_id), so output does not
/// depend on the worker count.
Stage1Result run_stage1_all(std::span<const SitePanel> panels, const Cutoffs& cutoffs, const Stage1Prior& prior,
                            const ChainConfig& config, std::size_t workers);

}  // namespace ordst
