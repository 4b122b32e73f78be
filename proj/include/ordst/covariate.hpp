#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "ordst/lattice.hpp"
#include "ordst/random.hpp"
#include "ordst/stage1.hpp"
#include "ordst/state.hpp"

namespace ordst {

// ---------------------------------------------------------------------------
// Seasonal detrending
// ---------------------------------------------------------------------------

inline constexpr double kSeasonalPeriod = 365.0 / 7.0;  // weeks per year
inline constexpr int kHarmonics = 5;
inline constexpr int kFourierTerms = 1 + 2 * kHarmonics;

/// [1, sin(2 pi k t / period) for k=1..5, cos(2 pi k t / period) for k=1..5].
Eigen::RowVectorXd fourier_design_row(double t);

/// Per-site least-squares seasonal fit; coef is kFourierTerms x n_covariates
/// (row 0 intercept, rows 1..5 sine, rows 6..10 cosine).
struct FourierFit {
  int site_id = 0;
  Eigen::MatrixXd coef;

  Eigen::Index n_covariates() const noexcept { return coef.cols(); }
  /// Fitted seasonal mean at (1-based) week t; defined for any t.
  Eigen::RowVectorXd trend(double t) const;
};

struct DetrendResult {
  FourierFit fit;
  Eigen::MatrixXd detrended;  // T x n_covariates, residual of the fit
};

/// Rows of `series` are weeks 1..T. Requires T >= 12 and a full-rank design.
DetrendResult fit_fourier_detrend(const Eigen::MatrixXd& series, int site_id = 0);

// ---------------------------------------------------------------------------
// Diagonal VAR(1): x_1 = w_1, x_t = diag(delta) x_{t-1} + w_t, w ~ MVN(0, Sigma)
// ---------------------------------------------------------------------------

struct VarSiteParams {
  Eigen::VectorXd delta;
  Eigen::MatrixXd sigma;

  bool operator==(const VarSiteParams& o) const {
    return delta.size() == o.delta.size() && sigma.rows() == o.sigma.rows() && delta == o.delta && sigma == o.sigma;
  }
};

struct VarReservoir {
  int site_id = 0;
  std::vector<VarSiteParams> draws;
  std::size_t explosive_draws = 0;  // draws with some |delta_j| >= 1
};

/// Stage-one prior delta_j ~ N(0, delta_sd^2); Sigma ~ IW(n_cov, I).
struct VarPrior {
  double delta_sd = 3.0;
};

struct MvnCanonical {
  Eigen::MatrixXd precision;
  Eigen::VectorXd linear;
};

/// Conditional of delta given Sigma with independent N(prior_mean_j,
/// prior_var_j) priors, in precision/linear-term form.
MvnCanonical var_delta_conditional(const Eigen::MatrixXd& detrended, const Eigen::MatrixXd& sigma,
                                   const Eigen::VectorXd& prior_mean, const Eigen::VectorXd& prior_var);

/// Conditional of Sigma given delta: IW(n_cov + T, I + sum_t r_t r_t'),
/// r_1 = x_1 and r_t = x_t - diag(delta) x_{t-1}.
struct InvWishartParams {
  double df = 0.0;
  Eigen::MatrixXd scale;
};
InvWishartParams var_sigma_conditional(const Eigen::MatrixXd& detrended, const Eigen::VectorXd& delta);

/// Log density of the detrended series under the VAR model.
double var_log_likelihood(const Eigen::MatrixXd& detrended, const VarSiteParams& params);
/// log IW(Sigma; df, scale) including the normaliser.
double inv_wishart_log_pdf(const Eigen::MatrixXd& sigma, double df, const Eigen::MatrixXd& scale);

VarReservoir var_stage1_site(const Eigen::MatrixXd& detrended, int site_id, const ChainConfig& config,
                             const VarPrior& prior, Rng& rng);

struct VarStage1Result {
  std::vector<VarReservoir> reservoirs;
  std::vector<std::string> warnings;
};

/// detrended[k] belongs to site_ids[k]; streams derived from (seed, site_id).
VarStage1Result var_stage1_all(std::span<const Eigen::MatrixXd> detrended, std::span<const int> site_ids,
                               const ChainConfig& config, const VarPrior& prior, std::size_t workers);

struct VarState {
  std::vector<VarSiteParams> sites;
  Eigen::VectorXd sigma2_delta;  // ICAR variance per covariate
};

struct VarPosteriorStore {
  std::vector<int> site_ids;
  std::vector<std::vector<VarSiteParams>> draws;  // draws[i][m]
  std::vector<Eigen::VectorXd> hyper;
  std::vector<std::size_t> iterations;

  std::size_t n_sites() const noexcept { return draws.size(); }
  std::size_t n_draws() const noexcept { return hyper.size(); }
};

/// Log R for swapping site i's VAR record: ICAR conditionals on each delta_j
/// field against the stage-one N(0, delta_sd^2) priors. Sigma's prior is the
/// same in both stages and cancels, as does the series likelihood.
double var_log_acceptance_ratio(const VarSiteParams& proposed, const VarSiteParams& current, std::size_t i,
                                const VarState& state, const LatticeGraph& graph, const VarPrior& prior);

struct VarStage2Config {
  ChainConfig chain;
  HyperPrior hyper_prior;
};

struct VarStage2Result {
  VarPosteriorStore store;
  AcceptanceStats stats;
  std::vector<std::string> warnings;
};

VarStage2Result var_stage2(std::span<const VarReservoir> reservoirs, const LatticeGraph& graph,
                           const VarStage2Config& config, const VarPrior& prior, Rng& rng);

/// Single-stage Gibbs oracle for the spatial VAR: delta_i | rest uses ICAR
/// conditional priors, Sigma_i | rest the IW conditional, then the ICAR
/// variances.
VarPosteriorStore var_single_stage(std::span<const Eigen::MatrixXd> detrended, const LatticeGraph& graph,
                                   const VarStage2Config& config, Rng& rng);

struct CovariatePath {
  Eigen::MatrixXd detrended;   // horizon x n_cov
  Eigen::MatrixXd covariates;  // detrended plus seasonal trend
};

/// Forward simulation from the last detrended vector at week t_last; the
/// trend is extended deterministically to weeks t_last+1..t_last+horizon.
CovariatePath simulate_var_forward(const Eigen::VectorXd& last, const VarSiteParams& params, std::size_t horizon,
                                   const FourierFit& fit, double t_last, Rng& rng);

}  // namespace ordst
