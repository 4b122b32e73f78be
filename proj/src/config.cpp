#include "ordst/config.hpp"

#include <fstream>

#include "ordst/error.hpp"

namespace ordst {

namespace {

using nlohmann::json;

json chain_json(const ChainConfig& c) {
  return {{"iterations", c.iterations}, {"burn_in", c.burn_in}, {"thin", c.thin}, {"seed", c.seed}};
}

void read_chain(const json& j, const char* key, ChainConfig& c) {
  if (!j.contains(key)) return;
  const auto& o = j.at(key);
  c.iterations = o.value("iterations", c.iterations);
  c.burn_in = o.value("burn_in", c.burn_in);
  c.thin = o.value("thin", c.thin);
  c.seed = o.value("seed", c.seed);
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  try {
    c.data_csv = j.value("data", std::string{});
    c.sites_csv = j.value("sites", std::string{});
    c.output_dir = j.value("output", std::string{});
    c.interior_cutoffs = j.value("cutoffs", c.interior_cutoffs);
    c.xi = j.value("xi", c.xi);
    c.workers = j.value("workers", c.workers);
    c.horizon = j.value("horizon", c.horizon);
    c.t_train = j.value("t_train", c.t_train);
    c.random_scan = j.value("random_scan", c.random_scan);
    c.force = j.value("force", c.force);
    c.forecast_seed = j.value("forecast_seed", c.forecast_seed);
    read_chain(j, "stage1", c.stage1);
    read_chain(j, "stage2", c.stage2);
    read_chain(j, "single_stage", c.single_stage);
    read_chain(j, "var_stage1", c.var_stage1);
    read_chain(j, "var_stage2", c.var_stage2);
    if (j.contains("simulate")) {
      const auto& s = j.at("simulate");
      c.simulate.rows = s.value("rows", c.simulate.rows);
      c.simulate.cols = s.value("cols", c.simulate.cols);
      c.simulate.weeks = s.value("weeks", c.simulate.weeks);
      c.simulate.covariates = s.value("covariates", c.simulate.covariates);
      c.simulate.gamma_mean = s.value("gamma_mean", c.simulate.gamma_mean);
      c.simulate.gamma_icar_var = s.value("gamma_icar_var", c.simulate.gamma_icar_var);
      c.simulate.beta0_mean = s.value("beta0_mean", c.simulate.beta0_mean);
      c.simulate.seed = s.value("seed", c.simulate.seed);
    }
  } catch (const json::exception& e) {
    throw Error("E_CONFIG", std::string("bad config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("E_IO", "cannot open config " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error("E_CONFIG", path.string() + ": " + e.what());
  }
}

json RunConfig::to_json() const {
  return {{"data", data_csv.string()},
          {"sites", sites_csv.string()},
          {"output", output_dir.string()},
          {"cutoffs", interior_cutoffs},
          {"xi", xi},
          {"workers", workers},
          {"horizon", horizon},
          {"t_train", t_train},
          {"random_scan", random_scan},
          {"force", force},
          {"forecast_seed", forecast_seed},
          {"stage1", chain_json(stage1)},
          {"stage2", chain_json(stage2)},
          {"single_stage", chain_json(single_stage)},
          {"var_stage1", chain_json(var_stage1)},
          {"var_stage2", chain_json(var_stage2)},
          {"simulate",
           {{"rows", simulate.rows},
            {"cols", simulate.cols},
            {"weeks", simulate.weeks},
            {"covariates", simulate.covariates},
            {"gamma_mean", simulate.gamma_mean},
            {"gamma_icar_var", simulate.gamma_icar_var},
            {"beta0_mean", simulate.beta0_mean},
            {"seed", simulate.seed}}}};
}

std::uint64_t RunConfig::hash() const {
  json j = to_json();
  j.erase("workers");
  j.erase("output");
  j.erase("data");
  j.erase("sites");
  return fnv1a64(j.dump());
}

void RunConfig::validate() const {
  if (interior_cutoffs < 1) throw Error("E_CONFIG", "cutoffs must be >= 1");
  if (!(xi > 0.0)) throw Error("E_CONFIG", "xi must be positive");
  if (workers < 1) throw Error("E_CONFIG", "workers must be >= 1");
  stage1.validate();
  stage2.validate();
  single_stage.validate();
  var_stage1.validate();
  var_stage2.validate();
}

}  // namespace ordst
