#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>

#include "ordst/stage1.hpp"

namespace ordst {

/// Synthetic-data generation settings used by the `simulate` command.
struct SimulateConfig {
  int rows = 4;
  int cols = 4;
  std::size_t weeks = 100;
  std::size_t covariates = 1;
  double gamma_mean = 1.0;
  double gamma_icar_var = 0.1;
  double beta0_mean = 1.5;
  std::uint64_t seed = 1;
};

/// Everything a pipeline run needs. Loaded from a JSON file; command-line
/// flags override individual fields afterwards.
struct RunConfig {
  std::filesystem::path data_csv;
  std::filesystem::path sites_csv;
  std::filesystem::path output_dir;

  int interior_cutoffs = 5;
  double xi = 3.0;                   // stage-one prior sd for every beta_p
  std::size_t workers = 1;
  std::size_t horizon = 13;
  std::size_t t_train = 0;           // 0 means all weeks

  ChainConfig stage1{50000, 10000, 10, 1};
  ChainConfig stage2{50000, 10000, 10, 2};
  ChainConfig single_stage{50000, 10000, 10, 3};
  ChainConfig var_stage1{20000, 5000, 10, 4};
  ChainConfig var_stage2{20000, 5000, 10, 5};
  bool random_scan = false;
  bool force = false;
  std::uint64_t forecast_seed = 6;
  SimulateConfig simulate;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  /// FNV-1a of the canonical JSON with the worker count and output directory
  /// removed, so those never change the bytes of any output.
  std::uint64_t hash() const;
  void validate() const;
};

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace ordst
