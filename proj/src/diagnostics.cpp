#include "ordst/diagnostics.hpp"

#include <cmath>
#include <limits>

#include "ordst/error.hpp"

namespace ordst {

EssResult effective_sample_size(std::span<const double> chain) {
  const std::size_t n = chain.size();
  if (n < 10) throw Error("E_CHAIN_SHORT", "ESS needs at least 10 draws, got " + std::to_string(n));
  double mean = 0.0;
  for (double v : chain) {
    if (!std::isfinite(v)) throw Error("E_DOMAIN", "ESS of a chain with non-finite values");
    mean += v;
  }
  mean /= static_cast<double>(n);

  std::vector<double> c(chain.begin(), chain.end());
  for (double& v : c) v -= mean;
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += c[t] * c[t + lag];
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  const double nd = static_cast<double>(n);
  if (!(c0 > 0.0)) return {nd, true};

  double tau = -1.0;
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    const double pair = (autocov(2 * m) + autocov(2 * m + 1)) / c0;
    if (!(pair > 0.0)) break;
    tau += 2.0 * pair;
  }
  double ess = nd / tau;
  if (!(ess > 0.0) || ess > nd) ess = nd;
  return {ess, false};
}

ParameterSummary summarize_chain(std::span<const double> chain, int site_id, std::string parameter) {
  if (chain.empty()) throw Error("E_EMPTY_STORE", "summary of an empty chain");
  ParameterSummary s;
  s.site_id = site_id;
  s.parameter = std::move(parameter);
  const double n = static_cast<double>(chain.size());
  for (double v : chain) s.mean += v;
  s.mean /= n;
  if (chain.size() > 1) {
    double ss = 0.0;
    for (double v : chain) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
  }
  if (chain.size() < 10) {
    s.ess = n;
    s.ess_flagged = true;
  } else {
    const auto e = effective_sample_size(chain);
    s.ess = e.ess;
    s.ess_flagged = e.flagged;
  }
  s.mcse = s.sd * std::sqrt(1.0 / s.ess);
  return s;
}

std::vector<std::string> site_parameter_names(std::size_t n_coef) {
  std::vector<std::string> names;
  for (std::size_t p = 0; p < n_coef; ++p) names.push_back("beta" + std::to_string(p));
  names.insert(names.end(), {"gamma", "rho", "sigma2", "z_last"});
  return names;
}

std::vector<double> site_parameter_values(const SiteParams& p) {
  std::vector<double> v(p.beta.data(), p.beta.data() + p.beta.size());
  v.push_back(p.gamma);
  v.push_back(p.rho());
  v.push_back(p.sigma2);
  v.push_back(p.z.size() > 0 ? p.z(p.z.size() - 1) : std::numeric_limits<double>::quiet_NaN());
  return v;
}

namespace {

std::string parameter_class(const std::string& name) {
  if (name.rfind("beta", 0) == 0) return "beta";
  if (name.rfind("delta", 0) == 0) return "delta";
  if (name.rfind("sigma_", 0) == 0) return "sigma";
  return name;
}

void finish_classes(StoreSummary& s) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : s.rows) {
    if (r.site_id == 0) continue;
    auto& a = acc[parameter_class(r.parameter)];
    a.first += r.ess;
    ++a.second;
  }
  for (const auto& [k, v] : acc) {
    s.class_mean_ess[k] = v.first / static_cast<double>(v.second);
    if (s.wall_seconds > 0.0) s.class_ess_per_hour[k] = ess_per_hour(s.class_mean_ess[k], s.wall_seconds);
  }
}

}  // namespace

StoreSummary summarize_store(const PosteriorStore& store, double wall_seconds) {
  if (store.n_sites() == 0 || store.n_draws() == 0) throw Error("E_EMPTY_STORE", "draw store is empty");
  StoreSummary s;
  s.wall_seconds = wall_seconds;
  const std::size_t m = store.n_draws();
  const std::size_t n_coef = static_cast<std::size_t>(store.draws[0][0].beta.size());
  const auto names = site_parameter_names(n_coef);
  std::vector<std::vector<double>> cols(names.size(), std::vector<double>(m));
  for (std::size_t i = 0; i < store.n_sites(); ++i) {
    for (std::size_t k = 0; k < m; ++k) {
      const auto v = site_parameter_values(store.draws[i][k]);
      for (std::size_t c = 0; c < names.size(); ++c) cols[c][k] = v[c];
    }
    for (std::size_t c = 0; c < names.size(); ++c) s.rows.push_back(summarize_chain(cols[c], store.site_ids[i], names[c]));
  }
  std::vector<double> h(m);
  for (std::size_t k = 0; k < m; ++k) h[k] = store.hyper[k].sigma2_gamma;
  s.rows.push_back(summarize_chain(h, 0, "sigma2_gamma"));
  for (std::size_t p = 0; p < n_coef; ++p) {
    for (std::size_t k = 0; k < m; ++k) h[k] = store.hyper[k].sigma2_beta(static_cast<Eigen::Index>(p));
    s.rows.push_back(summarize_chain(h, 0, "sigma2_beta" + std::to_string(p)));
  }
  finish_classes(s);
  return s;
}

StoreSummary summarize_var_store(const VarPosteriorStore& store, double wall_seconds) {
  if (store.n_sites() == 0 || store.n_draws() == 0) throw Error("E_EMPTY_STORE", "draw store is empty");
  StoreSummary s;
  s.wall_seconds = wall_seconds;
  const std::size_t m = store.n_draws();
  const Eigen::Index j = store.draws[0][0].delta.size();
  std::vector<double> col(m);
  for (std::size_t i = 0; i < store.n_sites(); ++i) {
    for (Eigen::Index d = 0; d < j; ++d) {
      for (std::size_t k = 0; k < m; ++k) col[k] = store.draws[i][k].delta(d);
      s.rows.push_back(summarize_chain(col, store.site_ids[i], "delta" + std::to_string(d + 1)));
    }
    for (Eigen::Index a = 0; a < j; ++a)
      for (Eigen::Index b = 0; b <= a; ++b) {
        for (std::size_t k = 0; k < m; ++k) col[k] = store.draws[i][k].sigma(a, b);
        s.rows.push_back(summarize_chain(col, store.site_ids[i], "sigma_" + std::to_string(a + 1) + std::to_string(b + 1)));
      }
  }
  for (Eigen::Index d = 0; d < j; ++d) {
    for (std::size_t k = 0; k < m; ++k) col[k] = store.hyper[k](d);
    s.rows.push_back(summarize_chain(col, 0, "sigma2_delta" + std::to_string(d + 1)));
  }
  finish_classes(s);
  return s;
}

double ComparisonRow::standardized() const {
  const double se = std::sqrt(mcse_a * mcse_a + mcse_b * mcse_b);
  const double d = std::abs(diff());
  if (se == 0.0) return d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return d / se;
}

std::vector<ComparisonRow> compare_summaries(const StoreSummary& a, const StoreSummary& b) {
  std::map<std::pair<int, std::string>, const ParameterSummary*> index;
  for (const auto& r : b.rows) index[{r.site_id, r.parameter}] = &r;
  std::vector<ComparisonRow> out;
  for (const auto& r : a.rows) {
    auto it = index.find({r.site_id, r.parameter});
    if (it == index.end()) continue;
    out.push_back({r.site_id, r.parameter, r.mean, it->second->mean, r.mcse, it->second->mcse});
  }
  return out;
}

}  // namespace ordst
