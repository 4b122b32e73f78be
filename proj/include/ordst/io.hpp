#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "ordst/covariate.hpp"
#include "ordst/diagnostics.hpp"
#include "ordst/forecast.hpp"
#include "ordst/lattice.hpp"
#include "ordst/model.hpp"
#include "ordst/stage1.hpp"
#include "ordst/state.hpp"
#include "ordst/synthetic.hpp"

namespace ordst::io {

namespace fs = std::filesystem;

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& s, const std::string& context);
long long parse_int(const std::string& s, const std::string& context);

/// Provenance line written as the first line of every CSV output.
struct RunMetadata {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string comment_line() const;  // "# config_hash=<16 hex> seed=<n>"
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // source line of each row

  std::size_t column(const std::string& name) const;  // throws E_SCHEMA if missing
};

/// Comma-separated, LF lines, '#' lines skipped, first remaining line is the header.
CsvTable read_csv(const fs::path& path);

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const RunMetadata* meta, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& fields);

 private:
  std::ofstream out_;
  fs::path path_;
};

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
};

struct IngestResult {
  std::vector<GridCell> grid;      // sorted by site id
  std::vector<SitePanel> panels;   // every week, standardised covariates
  std::size_t weeks = 0;
  std::size_t t_train = 0;
  Standardization standardization;

  /// Panels truncated to the first t_train weeks.
  std::vector<SitePanel> training() const;
  /// Observed levels for weeks t_train+1..t_train+horizon (n_sites x horizon).
  Eigen::MatrixXi holdout_levels(std::size_t horizon) const;
  /// Standardised covariate k (1-based, excluding the intercept) over the holdout weeks.
  Eigen::MatrixXd holdout_covariate(std::size_t k, std::size_t horizon) const;
};

/// Reads the long-format data CSV (site_id, week, y, x1..xP) and the sites
/// CSV (site_id, row, col). Covariates are standardised with the pooled mean
/// and population sd over weeks 1..t_train (t_train = 0 means all weeks).
/// Rejects missing or duplicate (site, week) cells, gaps in weeks, levels
/// outside 0..J and zero-variance covariates.
IngestResult ingest(const fs::path& data_csv, const fs::path& sites_csv, const Cutoffs& cutoffs,
                    std::size_t t_train = 0);

void write_data_csv(const fs::path& path, std::span<const SitePanel> panels, const RunMetadata* meta);
void write_sites_csv(const fs::path& path, std::span<const GridCell> grid, const RunMetadata* meta);

// ---------------------------------------------------------------------------
// Binary draw files (little-endian)
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kFormatVersion = 1;

/// "TSR1", version, site_id, T, P, n_draws, then per draw
/// beta_0..beta_P, gamma, sigma2, z_1..z_T as f64.
void write_reservoir(const fs::path& path, const Reservoir& reservoir);
Reservoir read_reservoir(const fs::path& path);
void write_reservoir_csv(const fs::path& path, const Reservoir& reservoir, const RunMetadata* meta);

/// "TVR1", version, site_id, J, n_draws, then per draw delta_1..delta_J and
/// the lower triangle of Sigma in row-major order as f64.
void write_var_reservoir(const fs::path& path, const VarReservoir& reservoir);
VarReservoir read_var_reservoir(const fs::path& path);

std::string site_file_name(int site_id, const std::string& extension);

/// Directory of site_XXXXX.tsr files plus hyper.csv.
void write_posterior_store(const fs::path& dir, const PosteriorStore& store, const RunMetadata* meta);
PosteriorStore read_posterior_store(const fs::path& dir);
void write_acceptance_csv(const fs::path& path, const AcceptanceStats& stats, const RunMetadata* meta);

/// Directory of site_XXXXX.tvr files plus var_hyper.csv.
void write_var_store(const fs::path& dir, const VarPosteriorStore& store, const RunMetadata* meta);
VarPosteriorStore read_var_store(const fs::path& dir);

void write_fourier_csv(const fs::path& path, std::span<const FourierFit> fits, const RunMetadata* meta);
std::vector<FourierFit> read_fourier_csv(const fs::path& path);

void write_truth_json(const fs::path& path, const SyntheticTruth& truth);
SyntheticTruth read_truth_json(const fs::path& path);

void write_summary_csv(const fs::path& path, const StoreSummary& summary, const RunMetadata* meta);
void write_comparison_csv(const fs::path& path, std::span<const ComparisonRow> rows, const RunMetadata* meta);

void write_forecast_csv(const fs::path& path, const ForecastDraws& draws, const RunMetadata* meta);

/// Byte-for-byte file comparison.
bool files_identical(const fs::path& a, const fs::path& b);

}  // namespace ordst::io
