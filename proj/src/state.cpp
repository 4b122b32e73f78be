#include "ordst/state.hpp"

namespace ordst {

std::vector<double> FullModelState::gamma_field() const {
  std::vector<double> v(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) v[i] = sites[i].gamma;
  return v;
}

std::vector<double> FullModelState::beta_field(Eigen::Index p) const {
  std::vector<double> v(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) v[i] = sites[i].beta(p);
  return v;
}

double neighbor_mean(const FullModelState& state, std::size_t i, const LatticeGraph& graph,
                     const std::function<double(const SiteParams&)>& value) {
  const auto nb = graph.neighbors(i);
  double s = 0.0;
  for (std::size_t j : nb) s += value(state.sites[j]);
  return s / static_cast<double>(nb.size());
}

double icar_conditional_log_density(const SiteParams& params, std::size_t i, const FullModelState& state,
                                    const LatticeGraph& graph) {
  const auto nb = graph.neighbors(i);
  const double deg = static_cast<double>(nb.size());

  double g = 0.0;
  for (std::size_t j : nb) g += state.sites[j].gamma;
  double lp = normal_log_pdf(params.gamma, g / deg, state.hyper.sigma2_gamma / deg);

  for (Eigen::Index p = 0; p < params.beta.size(); ++p) {
    double b = 0.0;
    for (std::size_t j : nb) b += state.sites[j].beta(p);
    lp += normal_log_pdf(params.beta(p), b / deg, state.hyper.sigma2_beta(p) / deg);
  }
  return lp;
}

}  // namespace ordst
