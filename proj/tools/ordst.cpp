// Command-line front end: simulate, fit, forecast and diagnose.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "ordst/config.hpp"
#include "ordst/covariate.hpp"
#include "ordst/diagnostics.hpp"
#include "ordst/error.hpp"
#include "ordst/forecast.hpp"
#include "ordst/io.hpp"
#include "ordst/lattice.hpp"
#include "ordst/single_stage.hpp"
#include "ordst/stage1.hpp"
#include "ordst/stage2.hpp"
#include "ordst/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ordst;

namespace {

using Clock = std::chrono::steady_clock;

// Flags shared by most subcommands; unset optionals leave the config alone.
struct Overrides {
  std::string config;
  std::string data, sites, out;
  std::optional<int> cutoffs;
  std::optional<std::size_t> workers, t_train, iters, burnin, thin, horizon;
  std::optional<std::uint64_t> seed;
  std::optional<double> xi;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON run configuration");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--seed", o.seed, "master seed for this stage");
  cmd->add_option("--cutoffs", o.cutoffs, "number of interior cutpoints J");
}

void add_data(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--data", o.data, "long-format data CSV (site_id,week,y,x1..xP)");
  cmd->add_option("--sites", o.sites, "sites CSV (site_id,row,col)");
  cmd->add_option("--t-train", o.t_train, "training weeks (0 = all)");
}

void add_chain(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--iters", o.iters, "iterations");
  cmd->add_option("--burnin", o.burnin, "burn-in iterations");
  cmd->add_option("--thin", o.thin, "keep every n-th iteration");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : RunConfig::load(o.config);
  if (!o.data.empty()) c.data_csv = o.data;
  if (!o.sites.empty()) c.sites_csv = o.sites;
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.cutoffs) c.interior_cutoffs = *o.cutoffs;
  if (o.workers) c.workers = *o.workers;
  if (o.t_train) c.t_train = *o.t_train;
  if (o.horizon) c.horizon = *o.horizon;
  if (o.xi) c.xi = *o.xi;
  return c;
}

void apply_chain(const Overrides& o, ChainConfig& chain) {
  if (o.iters) chain.iterations = *o.iters;
  if (o.burnin) chain.burn_in = *o.burnin;
  if (o.thin) chain.thin = *o.thin;
  if (o.seed) chain.seed = *o.seed;
}

void require(const fs::path& p, const char* what) {
  if (p.empty()) throw Error("E_CONFIG", std::string("missing ") + what);
}

json manifest_config(const RunConfig& c) {
  json j = c.to_json();
  j.erase("workers");
  j.erase("output");
  j.erase("data");
  j.erase("sites");
  return j;
}

void write_manifest(const RunConfig& c, const std::string& command, std::uint64_t seed, const json& extra = {}) {
  json j{{"command", command},
         {"config_hash", [&] {
            char buf[17];
            std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(c.hash()));
            return std::string(buf);
          }()},
         {"seed", seed},
         {"config", manifest_config(c)}};
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  fs::create_directories(c.output_dir);
  std::ofstream(c.output_dir / "manifest.json") << j.dump(1) << '\n';
}

void write_timing(const fs::path& dir, double seconds) {
  std::ofstream(dir / "timing.json") << json{{"wall_seconds", seconds}}.dump() << '\n';
}

double elapsed(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

void warn(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

io::IngestResult load_data(const RunConfig& c) {
  require(c.data_csv, "--data");
  require(c.sites_csv, "--sites");
  return io::ingest(c.data_csv, c.sites_csv, Cutoffs(c.interior_cutoffs), c.t_train);
}

// ---------------------------------------------------------------------------

void cmd_simulate(const Overrides& o, int rows, int cols, std::size_t weeks, std::size_t covariates,
                  std::optional<double> gamma_mean) {
  RunConfig c = resolve(o);
  require(c.output_dir, "--out");
  if (rows > 0) c.simulate.rows = rows;
  if (cols > 0) c.simulate.cols = cols;
  if (weeks > 0) c.simulate.weeks = weeks;
  if (covariates > 0) c.simulate.covariates = covariates;
  if (gamma_mean) c.simulate.gamma_mean = *gamma_mean;
  if (o.seed) c.simulate.seed = *o.seed;
  c.validate();

  TruthSpec spec = TruthSpec::standard(c.simulate.covariates);
  spec.gamma_mean = c.simulate.gamma_mean;
  spec.gamma_icar_var = c.simulate.gamma_icar_var;
  spec.beta_mean(0) = c.simulate.beta0_mean;
  spec.t_train = c.t_train;
  const auto grid = rectangular_grid(c.simulate.rows, c.simulate.cols);
  const auto ds = simulate_dataset(grid, c.simulate.weeks, c.simulate.covariates, c.interior_cutoffs, spec,
                                   c.simulate.seed);
  const io::RunMetadata meta{c.hash(), c.simulate.seed};
  io::write_data_csv(c.output_dir / "data.csv", ds.panels, &meta);
  io::write_sites_csv(c.output_dir / "sites.csv", ds.grid, &meta);
  io::write_truth_json(c.output_dir / "truth.json", ds.truth);
  write_manifest(c, "simulate", c.simulate.seed);
}

void cmd_stage1(const Overrides& o) {
  RunConfig c = resolve(o);
  apply_chain(o, c.stage1);
  require(c.output_dir, "--out");
  c.validate();
  const auto data = load_data(c);
  const auto panels = data.training();
  const auto start = Clock::now();
  const auto res = run_stage1_all(panels, Cutoffs(c.interior_cutoffs),
                                  Stage1Prior::standard(panels.front().n_coef(), c.xi), c.stage1, c.workers);
  const double secs = elapsed(start);
  fs::create_directories(c.output_dir);
  for (const auto& r : res.reservoirs) io::write_reservoir(c.output_dir / io::site_file_name(r.site_id, "tsr"), r);
  write_manifest(c, "stage1", c.stage1.seed);
  write_timing(c.output_dir, secs);
  warn(res.warnings);
  if (!res.failures.empty()) {
    const io::RunMetadata meta{c.hash(), c.stage1.seed};
    io::CsvWriter w(c.output_dir / "failures.csv", &meta, {"site_id", "code", "message"});
    for (const auto& f : res.failures) w.row({std::to_string(f.site_id), f.code, f.message});
    throw Error("E_SITE_FAILURES", std::to_string(res.failures.size()) + " site(s) failed; see failures.csv");
  }
}

std::vector<Reservoir> load_reservoirs(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".tsr") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Reservoir> out;
  for (const auto& f : files) out.push_back(io::read_reservoir(f));
  if (out.empty()) throw Error("E_EMPTY_RESERVOIR", "no reservoirs in " + dir.string());
  return out;
}

LatticeGraph load_graph(const RunConfig& c) {
  require(c.sites_csv, "--sites");
  const auto t = io::read_csv(c.sites_csv);
  std::vector<GridCell> grid;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string ctx = c.sites_csv.string() + ":" + std::to_string(t.line_numbers[r]);
    grid.push_back({static_cast<int>(io::parse_int(t.rows[r][t.column("site_id")], ctx)),
                    static_cast<int>(io::parse_int(t.rows[r][t.column("row")], ctx)),
                    static_cast<int>(io::parse_int(t.rows[r][t.column("col")], ctx))});
  }
  std::sort(grid.begin(), grid.end(), [](const GridCell& a, const GridCell& b) { return a.site_id < b.site_id; });
  return LatticeGraph::queen(grid);
}

void cmd_stage2(const Overrides& o, const std::string& reservoir_dir, bool random_scan) {
  RunConfig c = resolve(o);
  apply_chain(o, c.stage2);
  if (random_scan) c.random_scan = true;
  require(c.output_dir, "--out");
  require(reservoir_dir, "--reservoirs");
  c.validate();
  const auto graph = load_graph(c);
  const auto reservoirs = load_reservoirs(reservoir_dir);
  Stage2Config cfg;
  cfg.chain = c.stage2;
  cfg.random_scan = c.random_scan;
  Rng rng(c.stage2.seed);
  const auto start = Clock::now();
  const auto res = run_stage2(reservoirs, graph, cfg,
                              Stage1Prior::standard(static_cast<std::size_t>(reservoirs[0].draws[0].beta.size()), c.xi),
                              rng);
  const double secs = elapsed(start);
  const io::RunMetadata meta{c.hash(), c.stage2.seed};
  io::write_posterior_store(c.output_dir, res.store, &meta);
  io::write_acceptance_csv(c.output_dir / "acceptance.csv", res.stats, &meta);
  write_manifest(c, "stage2", c.stage2.seed);
  write_timing(c.output_dir, secs);
  warn(res.warnings);
}

void cmd_single_stage(const Overrides& o, bool force) {
  RunConfig c = resolve(o);
  apply_chain(o, c.single_stage);
  if (force) c.force = true;
  require(c.output_dir, "--out");
  c.validate();
  const auto data = load_data(c);
  const auto panels = data.training();
  const auto graph = LatticeGraph::queen(data.grid);
  SingleStageConfig cfg;
  cfg.chain = c.single_stage;
  cfg.force = c.force;
  Rng rng(c.single_stage.seed);
  const auto start = Clock::now();
  const auto res = run_single_stage(panels, Cutoffs(c.interior_cutoffs), graph, cfg, rng);
  const double secs = elapsed(start);
  const io::RunMetadata meta{c.hash(), c.single_stage.seed};
  io::write_posterior_store(c.output_dir, res.store, &meta);
  io::write_acceptance_csv(c.output_dir / "gamma_acceptance.csv", res.gamma_acceptance, &meta);
  write_manifest(c, "single-stage", c.single_stage.seed);
  write_timing(c.output_dir, secs);
  warn(res.warnings);
}

void cmd_covfit(const Overrides& o) {
  RunConfig c = resolve(o);
  apply_chain(o, c.var_stage1);
  apply_chain(o, c.var_stage2);
  if (o.seed) c.var_stage2.seed = derive_stream_seed(*o.seed, 2);
  require(c.output_dir, "--out");
  c.validate();
  const auto data = load_data(c);
  const auto panels = data.training();
  if (panels.front().x.cols() < 2) throw Error("E_CONFIG", "covfit needs at least one covariate");
  const auto graph = LatticeGraph::queen(data.grid);

  const auto start = Clock::now();
  std::vector<FourierFit> fits;
  std::vector<Eigen::MatrixXd> detrended;
  std::vector<int> ids;
  for (const auto& p : panels) {
    auto d = fit_fourier_detrend(p.x.rightCols(p.x.cols() - 1), p.site_id);
    fits.push_back(std::move(d.fit));
    detrended.push_back(std::move(d.detrended));
    ids.push_back(p.site_id);
  }
  const auto s1 = var_stage1_all(detrended, ids, c.var_stage1, VarPrior{}, c.workers);
  VarStage2Config cfg{c.var_stage2, HyperPrior{}};
  Rng rng(c.var_stage2.seed);
  const auto s2 = var_stage2(s1.reservoirs, graph, cfg, VarPrior{}, rng);
  const double secs = elapsed(start);

  const io::RunMetadata meta{c.hash(), c.var_stage1.seed};
  io::write_fourier_csv(c.output_dir / "fourier.csv", fits, &meta);
  for (const auto& r : s1.reservoirs)
    io::write_var_reservoir(c.output_dir / "var_stage1" / io::site_file_name(r.site_id, "tvr"), r);
  io::write_var_store(c.output_dir, s2.store, &meta);
  io::write_acceptance_csv(c.output_dir / "acceptance.csv", s2.stats, &meta);
  write_manifest(c, "covfit", c.var_stage1.seed, {{"stage2_seed", c.var_stage2.seed}});
  write_timing(c.output_dir, secs);
  warn(s1.warnings);
  warn(s2.warnings);
}

// Thins or truncates the longer store so both hold the same number of draws.
template <typename Store>
Store take_evenly(const Store& s, std::size_t n) {
  if (s.n_draws() == n) return s;
  Store out = s;
  out.hyper.clear();
  out.iterations.clear();
  for (auto& d : out.draws) d.clear();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t m = k * s.n_draws() / n;
    out.hyper.push_back(s.hyper[m]);
    if (!s.iterations.empty()) out.iterations.push_back(s.iterations[m]);
    for (std::size_t i = 0; i < s.n_sites(); ++i) out.draws[i].push_back(s.draws[i][m]);
  }
  return out;
}

void cmd_forecast(const Overrides& o, const std::string& posterior, const std::string& covariates, bool match_draws) {
  RunConfig c = resolve(o);
  if (o.seed) c.forecast_seed = *o.seed;
  require(c.output_dir, "--out");
  require(posterior, "--posterior");
  require(covariates, "--covariates");
  c.validate();
  if (c.horizon < 1) throw Error("E_HORIZON", "forecast horizon must be >= 1");
  const auto data = load_data(c);
  const auto panels = data.training();
  auto z_store = io::read_posterior_store(posterior);
  auto x_store = io::read_var_store(covariates);
  if (match_draws && z_store.n_draws() != x_store.n_draws()) {
    const std::size_t n = std::min(z_store.n_draws(), x_store.n_draws());
    z_store = take_evenly(z_store, n);
    x_store = take_evenly(x_store, n);
  }
  const auto fits = io::read_fourier_csv(fs::path(covariates) / "fourier.csv");
  if (fits.size() != panels.size()) throw Error("E_SHAPE", "fourier.csv site count differs from the data");
  std::vector<ForecastSite> sites;
  for (std::size_t i = 0; i < panels.size(); ++i) sites.push_back({&panels[i], &fits[i]});

  const auto start = Clock::now();
  const auto draws = forecast_drought(z_store, x_store, sites, Cutoffs(c.interior_cutoffs), c.horizon,
                                      c.forecast_seed, c.workers);
  const double secs = elapsed(start);
  const io::RunMetadata meta{c.hash(), c.forecast_seed};
  io::write_forecast_csv(c.output_dir / "forecast.csv", draws, &meta);
  write_manifest(c, "forecast", c.forecast_seed);
  write_timing(c.output_dir, secs);

  if (data.t_train + c.horizon > data.weeks) {
    std::cerr << "warning: W_NO_HOLDOUT: data ends before the forecast horizon; metrics skipped\n";
    return;
  }
  const auto holdout = data.holdout_levels(c.horizon);
  const auto w1 = within_one_probability(draws, holdout);
  Eigen::MatrixXd median(holdout.rows(), holdout.cols());
  for (Eigen::Index i = 0; i < holdout.rows(); ++i)
    for (Eigen::Index h = 0; h < holdout.cols(); ++h)
      median(i, h) = posterior_median_level(draws, static_cast<std::size_t>(i), static_cast<std::size_t>(h));
  const Eigen::VectorXd level_rmse = rmse(median, holdout.cast<double>());

  io::CsvWriter by_site(c.output_dir / "within_one.csv", &meta, {"site_id", "horizon", "within_one_prob"});
  for (Eigen::Index i = 0; i < w1.by_site.rows(); ++i)
    for (Eigen::Index h = 0; h < w1.by_site.cols(); ++h)
      by_site.row({std::to_string(draws.site_ids[static_cast<std::size_t>(i)]), std::to_string(h + 1),
                   io::format_double(w1.by_site(i, h))});
  io::CsvWriter metrics(c.output_dir / "metrics.csv", &meta, {"horizon", "mean_within_one_prob", "rmse"});
  for (Eigen::Index h = 0; h < w1.mean_by_horizon.size(); ++h)
    metrics.row({std::to_string(h + 1), io::format_double(w1.mean_by_horizon(h)), io::format_double(level_rmse(h))});
  io::CsvWriter cov(c.output_dir / "covariate_rmse.csv", &meta, {"covariate", "horizon", "rmse"});
  for (std::size_t k = 0; k < draws.n_cov; ++k) {
    const Eigen::VectorXd r = rmse(covariate_point_forecast(draws, k), data.holdout_covariate(k + 1, c.horizon));
    for (Eigen::Index h = 0; h < r.size(); ++h)
      cov.row({std::to_string(k + 1), std::to_string(h + 1), io::format_double(r(h))});
  }
}

double read_timing(const fs::path& dir) {
  std::ifstream in(dir / "timing.json");
  if (!in) return 0.0;
  try {
    return json::parse(in).value("wall_seconds", 0.0);
  } catch (const json::exception&) {
    return 0.0;
  }
}

StoreSummary summarize_dir(const fs::path& dir) {
  const double secs = read_timing(dir);
  if (fs::exists(dir / "var_hyper.csv")) return summarize_var_store(io::read_var_store(dir), secs);
  return summarize_store(io::read_posterior_store(dir), secs);
}

void cmd_diagnose(const Overrides& o, const std::string& store, const std::vector<std::string>& compare) {
  RunConfig c = resolve(o);
  require(c.output_dir, "--out");
  const io::RunMetadata meta{c.hash(), 0};
  fs::create_directories(c.output_dir);
  if (!compare.empty()) {
    if (compare.size() != 2) throw Error("E_CONFIG", "--compare takes two store directories");
    const auto a = summarize_dir(compare[0]);
    const auto b = summarize_dir(compare[1]);
    const auto rows = compare_summaries(a, b);
    io::write_comparison_csv(c.output_dir / "comparison.csv", rows, &meta);
    std::size_t within = 0;
    for (const auto& r : rows) within += r.standardized() <= 3.0 ? 1 : 0;
    std::cout << within << " of " << rows.size() << " parameters within 3 combined MCSE\n";
    return;
  }
  require(store, "--store");
  const auto s = summarize_dir(store);
  io::write_summary_csv(c.output_dir / "summary.csv", s, &meta);
  {
    io::CsvWriter w(c.output_dir / "class_ess.csv", &meta, {"class", "mean_ess"});
    for (const auto& [name, ess] : s.class_mean_ess) w.row({name, io::format_double(ess)});
  }
  // Wall-clock derived, so kept apart from the reproducible outputs.
  if (!s.class_ess_per_hour.empty()) {
    io::CsvWriter w(c.output_dir / "efficiency.csv", &meta, {"class", "ess_per_hour", "wall_seconds"});
    for (const auto& [name, rate] : s.class_ess_per_hour)
      w.row({name, io::format_double(rate), io::format_double(s.wall_seconds)});
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage MCMC for spatio-temporal ordinal data on a lattice"};
  app.require_subcommand(1);
  Overrides o;

  int rows = 0, cols = 0;
  std::size_t weeks = 0, covariates = 0;
  std::optional<double> gamma_mean;
  auto* sim = app.add_subcommand("simulate", "write a synthetic data set and its truth");
  add_common(sim, o);
  sim->add_option("--rows", rows);
  sim->add_option("--cols", cols);
  sim->add_option("--weeks", weeks);
  sim->add_option("--covariates", covariates);
  sim->add_option("--gamma-mean", gamma_mean, "mean of the logit-rho field");
  sim->add_option("--t-train", o.t_train, "weeks used for standardisation");

  auto* s1 = app.add_subcommand("stage1", "independent per-site fits, written as reservoirs");
  add_common(s1, o);
  add_data(s1, o);
  add_chain(s1, o);
  s1->add_option("--workers", o.workers);
  s1->add_option("--xi", o.xi, "prior sd of every beta coefficient");

  std::string reservoir_dir;
  bool random_scan = false;
  auto* s2 = app.add_subcommand("stage2", "spatial resampling of stage-one reservoirs");
  add_common(s2, o);
  add_chain(s2, o);
  s2->add_option("--sites", o.sites, "sites CSV");
  s2->add_option("--reservoirs", reservoir_dir, "directory of stage-one reservoirs");
  s2->add_flag("--random-scan", random_scan, "visit sites in a fresh random order each iteration");
  s2->add_option("--xi", o.xi, "stage-one prior sd of every beta coefficient");

  bool force = false;
  auto* ss = app.add_subcommand("single-stage", "reference sampler of the spatial model");
  add_common(ss, o);
  add_data(ss, o);
  add_chain(ss, o);
  ss->add_flag("--force", force, "run even above the size guard");

  auto* cf = app.add_subcommand("covfit", "seasonal detrending and two-stage VAR fit of the covariates");
  add_common(cf, o);
  add_data(cf, o);
  add_chain(cf, o);
  cf->add_option("--workers", o.workers);

  std::string posterior, cov_dir;
  bool match_draws = false;
  auto* fc = app.add_subcommand("forecast", "posterior-predictive drought forecasts and metrics");
  add_common(fc, o);
  add_data(fc, o);
  fc->add_option("--horizon", o.horizon);
  fc->add_option("--posterior", posterior, "stage-two or single-stage store");
  fc->add_option("--covariates", cov_dir, "covfit output directory");
  fc->add_option("--workers", o.workers);
  fc->add_flag("--match-draws", match_draws, "subsample the larger store to equalise draw counts");

  std::string store;
  std::vector<std::string> compare;
  auto* dg = app.add_subcommand("diagnose", "posterior summaries, ESS and store comparison");
  add_common(dg, o);
  dg->add_option("--store", store, "draw store directory");
  dg->add_option("--compare", compare, "two store directories to compare")->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*sim) cmd_simulate(o, rows, cols, weeks, covariates, gamma_mean);
    else if (*s1) cmd_stage1(o);
    else if (*s2) cmd_stage2(o, reservoir_dir, random_scan);
    else if (*ss) cmd_single_stage(o, force);
    else if (*cf) cmd_covfit(o);
    else if (*fc) cmd_forecast(o, posterior, cov_dir, match_draws);
    else if (*dg) cmd_diagnose(o, store, compare);
  } catch (const Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: E_INTERNAL: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
