#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ordst/covariate.hpp"
#include "ordst/state.hpp"

namespace ordst {

struct EssResult {
  double ess = 0.0;
  bool flagged = false;  // constant chain (or too short to estimate); ess set to N
};

/// Effective sample size with Geyer's initial positive sequence estimator:
/// N / (1 + 2 sum rho_k), summing lag pairs (rho_2m + rho_2m+1) while they
/// stay positive. Clipped to (0, N]. Requires N >= 10 finite values.
EssResult effective_sample_size(std::span<const double> chain);

struct ParameterSummary {
  int site_id = 0;  // 0 for global (hyper) parameters
  std::string parameter;
  double mean = 0.0;
  double sd = 0.0;
  double ess = 0.0;
  double mcse = 0.0;
  bool ess_flagged = false;
};

/// Mean, sd (n - 1 denominator), ESS and MCSE = sd / sqrt(ESS). Chains
/// shorter than 10 draws get ESS = N and are flagged.
ParameterSummary summarize_chain(std::span<const double> chain, int site_id, std::string parameter);

struct StoreSummary {
  std::vector<ParameterSummary> rows;
  /// Mean ESS across sites per parameter class ("beta", "gamma", "rho", "sigma2", "z_last").
  std::map<std::string, double> class_mean_ess;
  double wall_seconds = 0.0;
  std::map<std::string, double> class_ess_per_hour;  // empty when wall_seconds <= 0
};

/// Site parameters reported per draw store, in column order.
std::vector<std::string> site_parameter_names(std::size_t n_coef);
/// Values of the named site parameters for one record.
std::vector<double> site_parameter_values(const SiteParams& p);

StoreSummary summarize_store(const PosteriorStore& store, double wall_seconds = 0.0);
StoreSummary summarize_var_store(const VarPosteriorStore& store, double wall_seconds = 0.0);

inline double ess_per_hour(double ess, double wall_seconds) { return ess / (wall_seconds / 3600.0); }

struct ComparisonRow {
  int site_id = 0;
  std::string parameter;
  double mean_a = 0.0, mean_b = 0.0;
  double mcse_a = 0.0, mcse_b = 0.0;
  double diff() const { return mean_a - mean_b; }
  /// |diff| / sqrt(mcse_a^2 + mcse_b^2); 0 when both MCSEs vanish and diff is 0.
  double standardized() const;
};

/// Joins two summaries on (site_id, parameter).
std::vector<ComparisonRow> compare_summaries(const StoreSummary& a, const StoreSummary& b);

}  // namespace ordst
