#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "ordst/lattice.hpp"
#include "ordst/model.hpp"

namespace ordst {

/// IG(shape, scale) prior shared by the spatial variance hyperparameters.
struct HyperPrior {
  double shape = 0.5;
  double scale = 0.5;
};

/// Current values of every site's (z, theta) plus the spatial variances.
/// sites[i] belongs to site_id i + 1.
struct FullModelState {
  std::vector<SiteParams> sites;
  HyperParams hyper;
  std::size_t iteration = 0;

  std::vector<double> gamma_field() const;
  std::vector<double> beta_field(Eigen::Index p) const;
};

struct AcceptanceStats {
  std::vector<std::size_t> proposed;
  std::vector<std::size_t> accepted;

  explicit AcceptanceStats(std::size_t n_sites = 0) : proposed(n_sites, 0), accepted(n_sites, 0) {}
  double rate(std::size_t i) const {
    return proposed[i] == 0 ? 0.0 : static_cast<double>(accepted[i]) / static_cast<double>(proposed[i]);
  }
};

/// Retained posterior draws: draws[i][m] is site i's record at retained
/// iteration m; hyper[m] the matching spatial variances.
struct PosteriorStore {
  std::vector<int> site_ids;
  std::vector<std::vector<SiteParams>> draws;
  std::vector<HyperParams> hyper;
  std::vector<std::size_t> iterations;  // 1-based sampler iteration of each retained draw

  std::size_t n_sites() const noexcept { return draws.size(); }
  std::size_t n_draws() const noexcept { return hyper.size(); }
};

/// Mean of `value(sites[j])` over the neighbours j of site i.
double neighbor_mean(const FullModelState& state, std::size_t i, const LatticeGraph& graph,
                     const std::function<double(const SiteParams&)>& value);

/// Sum over fields (gamma, beta_0..beta_P) of the ICAR conditional log
/// density of `params` at site i, neighbours read from `state`.
double icar_conditional_log_density(const SiteParams& params, std::size_t i, const FullModelState& state,
                                    const LatticeGraph& graph);

}  // namespace ordst
