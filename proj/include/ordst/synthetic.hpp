#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ordst/covariate.hpp"
#include "ordst/lattice.hpp"
#include "ordst/model.hpp"
#include "ordst/random.hpp"

namespace ordst {

/// Generating values for a synthetic data set.
struct TruthSpec {
  Eigen::VectorXd beta_mean;      // P+1 target field means
  Eigen::VectorXd beta_icar_var;  // P+1 field variances (0 gives a constant field)
  double gamma_mean = 1.0;
  double gamma_icar_var = 0.1;
  double sigma2_min = 0.5;
  double sigma2_max = 1.0;
  // Covariate process: seasonal cycle plus diagonal VAR(1).
  Eigen::VectorXd covariate_delta;  // P
  double covariate_innovation_sd = 1.0;
  double covariate_innovation_corr = 0.3;
  double seasonal_amplitude = 1.0;
  bool deterministic_covariates = false;  // seasonal cycle only, no VAR noise
  double car_ridge = 1e-4;
  std::size_t t_train = 0;  // weeks used for standardisation; 0 means all

  /// Reasonable defaults for P covariates.
  static TruthSpec standard(std::size_t p);
  void validate(std::size_t p) const;
};

struct SyntheticTruth {
  std::vector<SiteParams> sites;         // beta, gamma, sigma2, full-length z
  std::vector<VarSiteParams> covariate;  // VAR truth on the raw (unstandardised) scale
  Eigen::VectorXd covariate_mean;        // standardisation constants
  Eigen::VectorXd covariate_sd;
  double car_ridge = 0.0;
  std::uint64_t seed = 0;
  std::string field_method;
};

struct SyntheticDataset {
  std::vector<GridCell> grid;
  std::vector<SitePanel> panels;  // all T weeks, standardised covariates
  SyntheticTruth truth;
};

/// Row-major grid of rows x cols cells with site ids 1..rows*cols.
std::vector<GridCell> rectangular_grid(int rows, int cols);

/// Proper CAR draw with precision (D - A + ridge I) / variance, shifted to
/// have sample mean `mean`. Zero variance returns the constant field.
std::vector<double> simulate_car_field(const LatticeGraph& graph, double variance, double mean, double ridge,
                                       Rng& rng);

/// Forward-simulates the latent AR(1) series for given parameters.
Eigen::VectorXd simulate_latent(const Eigen::VectorXd& beta, double gamma, double sigma2, const Eigen::MatrixXd& x,
                                Rng& rng);

/// Covariates are generated, standardised over the first t_train weeks
/// (pooled across sites), then the latent process and ordinal levels are
/// drawn from the model.
SyntheticDataset simulate_dataset(std::span<const GridCell> grid, std::size_t weeks, std::size_t n_covariates,
                                  int interior_cutoffs, const TruthSpec& spec, std::uint64_t seed);

}  // namespace ordst
