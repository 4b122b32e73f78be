// Acceptance suite: prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails.
#include <sys/wait.h>

#include <algorithm>
#include <boost/math/distributions/gamma.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ordst/covariate.hpp"
#include "ordst/diagnostics.hpp"
#include "ordst/forecast.hpp"
#include "ordst/io.hpp"
#include "ordst/single_stage.hpp"
#include "ordst/stage1.hpp"
#include "ordst/stage2.hpp"
#include "ordst/synthetic.hpp"
#include "support.hpp"

using namespace ordst;
namespace ts = testing_support;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class F>
double timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return seconds_since(t0);
}

// ---------------------------------------------------------------------------
// 4x4 benchmark shared by criteria 1, 7 and 9.

struct Benchmark {
  SyntheticDataset data;
  LatticeGraph graph;
  Cutoffs cutoffs{5};
  Stage1Result stage1_w4;
  Stage1Result stage1_w1;
  Stage2Result stage2;
  SingleStageResult single;
  double t_stage1_w4 = 0, t_stage1_w1 = 0, t_stage2 = 0, t_single = 0;

  Benchmark()
      : data(simulate_dataset(rectangular_grid(4, 4), 100, 1, 5, TruthSpec::standard(1), 2024)),
        graph(LatticeGraph::queen(data.grid)) {}

  void run() {
    const auto prior = Stage1Prior::standard(2);
    const ChainConfig s1{50000, 10000, 10, 12};
    t_stage1_w4 = timed([&] { stage1_w4 = run_stage1_all(data.panels, cutoffs, prior, s1, 4); });
    t_stage1_w1 = timed([&] { stage1_w1 = run_stage1_all(data.panels, cutoffs, prior, s1, 1); });
    Stage2Config s2;
    s2.chain = {50000, 10000, 10, 13};
    Rng r2(s2.chain.seed);
    t_stage2 = timed([&] { stage2 = run_stage2(stage1_w4.reservoirs, graph, s2, prior, r2); });
    SingleStageConfig sc;
    sc.chain = {50000, 10000, 10, 11};
    Rng rs(sc.chain.seed);
    t_single = timed([&] { single = run_single_stage(data.panels, cutoffs, graph, sc, rs); });
  }
};

Outcome criterion1(const Benchmark& b) {
  const auto a = summarize_store(b.stage2.store);
  const auto s = summarize_store(b.single.store);
  std::size_t n = 0, within = 0;
  double worst = 0.0;
  for (const auto& r : compare_summaries(a, s)) {
    if (r.site_id == 0) continue;
    ++n;
    within += r.standardized() <= 3.0 ? 1 : 0;
    worst = std::max(worst, r.standardized());
  }
  const double frac = n ? static_cast<double>(within) / static_cast<double>(n) : 0.0;
  return {n == 96 && frac >= 0.95, std::to_string(within) + "/" + std::to_string(n) +
                                       " site parameters within 3 combined MCSE (" + fmt(100 * frac) +
                                       "%, need >= 95%); largest standardized gap " + fmt(worst)};
}

// ---------------------------------------------------------------------------

SiteParams random_site(Rng& rng, Eigen::Index k, Eigen::Index t) {
  SiteParams p;
  p.beta = Eigen::VectorXd(k);
  for (Eigen::Index j = 0; j < k; ++j) p.beta(j) = 2.0 * rng.normal();
  p.gamma = rng.normal();
  p.sigma2 = 0.3 + 2.0 * rng.uniform();
  p.z = Eigen::VectorXd(t);
  for (Eigen::Index s = 0; s < t; ++s) p.z(s) = 2.0 * rng.normal();
  return p;
}

double icar_joint(const FullModelState& s, const LatticeGraph& g) {
  double lp = icar_log_density_unnormalized(s.gamma_field(), s.hyper.sigma2_gamma, g);
  for (Eigen::Index p = 0; p < s.hyper.sigma2_beta.size(); ++p)
    lp += icar_log_density_unnormalized(s.beta_field(p), s.hyper.sigma2_beta(p), g);
  return lp;
}

Outcome criterion2() {
  const auto g = LatticeGraph::queen(rectangular_grid(4, 4));
  const auto prior = Stage1Prior::standard(2);
  Rng rng(202);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const Eigen::MatrixXd x = ts::random_design(rng, 8, 1);
    FullModelState s;
    for (int i = 0; i < 16; ++i) s.sites.push_back(random_site(rng, 2, 8));
    s.hyper.sigma2_gamma = 0.1 + 3.0 * rng.uniform();
    s.hyper.sigma2_beta = Eigen::VectorXd(2);
    s.hyper.sigma2_beta << 0.1 + 3.0 * rng.uniform(), 0.1 + 3.0 * rng.uniform();
    const std::size_t i = rng.index(16);
    const SiteParams prop = random_site(rng, 2, 8);
    const SiteParams cur = s.sites[i];
    // Full posterior kernel of the state with site i replaced, divided by the
    // stage-one posterior kernel of the replacement.
    auto expanded = [&](const SiteParams& p) {
      FullModelState t = s;
      t.sites[i] = p;
      const double lik = ar1_log_density(p.z, p.beta, p.gamma, p.sigma2, x);
      const double full = lik + icar_joint(t, g) + inv_gamma_log_pdf(p.sigma2, prior.ig_shape, prior.ig_scale);
      return full - (lik + stage1_log_prior(p, prior));
    };
    const double diff = (expanded(prop) - expanded(cur)) - log_acceptance_ratio(prop, cur, i, s, g, prior);
    worst = std::max(worst, std::abs(diff));
  }
  return {worst < 1e-10, "max |expanded - simplified| over 1000 states = " + fmt(worst, 3) + " (need < 1e-10)"};
}

// ---------------------------------------------------------------------------

SitePanel small_panel(Rng& rng, int t, int p, const Cutoffs& c) {
  SitePanel panel;
  panel.site_id = 1;
  panel.x = ts::random_design(rng, t, p);
  panel.y.resize(static_cast<std::size_t>(t));
  for (auto& y : panel.y) y = static_cast<int>(rng.index(static_cast<std::size_t>(c.levels())));
  return panel;
}

SiteParams consistent_site(Rng& rng, const SitePanel& panel, const Cutoffs& c) {
  SiteParams p;
  p.beta = Eigen::VectorXd(panel.x.cols());
  for (Eigen::Index k = 0; k < p.beta.size(); ++k) p.beta(k) = rng.normal();
  p.gamma = rng.normal();
  p.sigma2 = 0.5 + rng.uniform();
  p.z.resize(panel.x.rows());
  for (std::size_t t = 0; t < panel.length(); ++t) {
    const auto b = latent_bounds(panel.y[t], c);
    p.z(static_cast<Eigen::Index>(t)) = truncated_normal(rng, 1.0, 2.0, b.lower, b.upper);
  }
  return p;
}

Eigen::MatrixXd simulate_var_series(const VarSiteParams& p, Eigen::Index t, Rng& rng) {
  const Eigen::MatrixXd l = p.sigma.llt().matrixL();
  const auto j = p.delta.size();
  Eigen::MatrixXd x(t, j);
  Eigen::VectorXd prev = Eigen::VectorXd::Zero(j), e(j);
  for (Eigen::Index r = 0; r < t; ++r) {
    for (Eigen::Index k = 0; k < j; ++k) e(k) = rng.normal();
    prev = p.delta.cwiseProduct(prev) + l * e;
    x.row(r) = prev.transpose();
  }
  return x;
}

// Sigma | delta for a scalar series against a griddy oracle; also used by criterion 9.
double iw_ks(Rng& rng) {
  VarSiteParams p;
  p.delta = Eigen::VectorXd::Constant(1, 0.4);
  p.sigma = Eigen::MatrixXd::Constant(1, 1, 1.2);
  const Eigen::MatrixXd x = simulate_var_series(p, 5, rng);
  const auto iw = var_sigma_conditional(x, p.delta);
  std::vector<double> s(50000);
  for (double& v : s) v = inverse_wishart(rng, iw.df, iw.scale)(0, 0);
  ts::GriddyCdf cdf(
      [&](double v) {
        VarSiteParams q = p;
        q.sigma(0, 0) = v;
        return var_log_likelihood(x, q) + inv_wishart_log_pdf(q.sigma, 1.0, Eigen::MatrixXd::Identity(1, 1));
      },
      1e-4, 60.0, 100000);
  return ts::ks_distance(s, cdf);
}

Outcome criterion3() {
  const Cutoffs c(5);
  Rng rng(303);
  const std::size_t n = 50000;
  std::vector<std::pair<std::string, double>> ks;

  {  // z, T = 1, through the sweep itself
    SitePanel panel = small_panel(rng, 1, 1, c);
    panel.y = {2};
    SiteParams p = consistent_site(rng, panel, c);
    std::vector<double> s(n);
    for (double& v : s) v = gibbs_update_z(p, panel, c, rng)(0);
    ts::GriddyCdf cdf(
        [&](double v) { return ar1_log_density(Eigen::VectorXd::Constant(1, v), p.beta, p.gamma, p.sigma2, panel.x); },
        latent_bounds(2, c).lower, latent_bounds(2, c).upper);
    ks.emplace_back("z(T=1)", ts::ks_distance(s, cdf));
  }
  {  // z, T = 3, each position
    SitePanel panel = small_panel(rng, 3, 1, c);
    panel.y = {0, 3, 5};
    SiteParams p = consistent_site(rng, panel, c);
    p.gamma = 1.5;
    for (std::size_t t = 0; t < 3; ++t) {
      const auto m = z_conditional(p, panel, t);
      const auto b = latent_bounds(panel.y[t], c);
      const double sd = std::sqrt(m.var);
      std::vector<double> s(n);
      for (double& v : s) v = truncated_normal(rng, m.mean, sd, b.lower, b.upper);
      const double lo = std::isinf(b.lower) ? std::min(b.upper, m.mean) - 12.0 * sd : b.lower;
      const double hi = std::isinf(b.upper) ? std::max(b.lower, m.mean) + 12.0 * sd : b.upper;
      ts::GriddyCdf cdf(
          [&](double v) {
            Eigen::VectorXd z = p.z;
            z(static_cast<Eigen::Index>(t)) = v;
            return ar1_log_density(z, p.beta, p.gamma, p.sigma2, panel.x);
          },
          lo, hi, 20000);
      ks.emplace_back("z(T=3,t=" + std::to_string(t + 1) + ")", ts::ks_distance(s, cdf));
    }
  }
  {  // beta, T = 5, intercept only
    SitePanel panel = small_panel(rng, 5, 0, c);
    SiteParams p = consistent_site(rng, panel, c);
    const auto prior = Stage1Prior::standard(1);
    std::vector<double> s(n);
    for (double& v : s) v = gibbs_update_beta(p, panel, prior, rng)(0);
    const double m = ts::mean_of(s);
    ts::GriddyCdf cdf(
        [&](double b) {
          return ar1_log_density(p.z, Eigen::VectorXd::Constant(1, b), p.gamma, p.sigma2, panel.x) +
                 normal_log_pdf(b, 0.0, 9.0);
        },
        m - 10.0, m + 10.0, 20000);
    ks.emplace_back("beta", ts::ks_distance(s, cdf));
  }
  {  // rho, T = 5
    SitePanel panel = small_panel(rng, 5, 1, c);
    SiteParams p = consistent_site(rng, panel, c);
    std::vector<double> s(n);
    for (double& v : s) v = inverse_logit(gibbs_update_rho(p, panel, rng).gamma);
    ts::GriddyCdf cdf([&](double r) { return ar1_log_density(p.z, p.beta, logit(r), p.sigma2, panel.x); }, 1e-9,
                      1.0 - 1e-9, 20000);
    ks.emplace_back("rho", ts::ks_distance(s, cdf));
  }
  {  // sigma2, T = 5
    SitePanel panel = small_panel(rng, 5, 1, c);
    SiteParams p = consistent_site(rng, panel, c);
    const auto prior = Stage1Prior::standard(2);
    std::vector<double> s(n);
    for (double& v : s) v = gibbs_update_sigma2(p, panel, prior, rng);
    const auto ig = sigma2_conditional(p, panel, prior.ig_shape, prior.ig_scale);
    ts::GriddyCdf cdf(
        [&](double v) { return ar1_log_density(p.z, p.beta, p.gamma, v, panel.x) + inv_gamma_log_pdf(v, 0.5, 0.5); },
        1e-6, 80.0 * ig.scale / (ig.shape + 1.0), 100000);
    ks.emplace_back("sigma2", ts::ks_distance(s, cdf));
  }
  {  // hypervariance, 2x2 lattice
    const auto g = LatticeGraph::queen(rectangular_grid(2, 2));
    std::vector<double> field{0.3, -0.5, 1.1, 0.2};
    std::vector<double> s(n);
    for (double& v : s) v = gibbs_update_hypervariance(field, g, HyperPrior{}, rng);
    const auto ig = hypervariance_conditional(field, g, HyperPrior{});
    ts::GriddyCdf cdf(
        [&](double v) {
          return -2.0 * std::log(v) + icar_log_density_unnormalized(field, v, g) + inv_gamma_log_pdf(v, 0.5, 0.5);
        },
        1e-6, 200.0 * ig.scale / (ig.shape + 1.0), 200000);
    ks.emplace_back("hypervariance", ts::ks_distance(s, cdf));
  }
  {  // VAR delta, T = 5
    VarSiteParams p;
    p.delta = Eigen::VectorXd::Constant(1, 0.5);
    p.sigma = Eigen::MatrixXd::Constant(1, 1, 0.8);
    const Eigen::MatrixXd x = simulate_var_series(p, 5, rng);
    const auto mc = var_delta_conditional(x, p.sigma, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 9.0));
    std::vector<double> s(n);
    Eigen::VectorXd out;
    for (double& v : s) {
      mvn_canonical(rng, mc.precision, mc.linear, out);
      v = out(0);
    }
    ts::GriddyCdf cdf(
        [&](double d) {
          VarSiteParams q = p;
          q.delta(0) = d;
          return var_log_likelihood(x, q) + normal_log_pdf(d, 0.0, 9.0);
        },
        -15.0, 15.0, 60000);
    ks.emplace_back("VAR delta", ts::ks_distance(s, cdf));
  }
  ks.emplace_back("VAR Sigma", iw_ks(rng));

  double worst = 0.0;
  std::string parts;
  for (const auto& [name, d] : ks) {
    worst = std::max(worst, d);
    parts += (parts.empty() ? "" : ", ") + name + "=" + fmt(d, 3);
  }
  return {worst < 0.02, "max KS " + fmt(worst, 3) + " (need < 0.02): " + parts};
}

// ---------------------------------------------------------------------------

Outcome criterion4() {
  const LatticeGraph g({{1}, {0}});
  const auto prior = Stage1Prior::standard(2);
  const HyperPrior hp{};
  Rng rng(404);
  std::vector<Reservoir> res(2);
  for (int i = 0; i < 2; ++i) {
    res[i].site_id = i + 1;
    for (int m = 0; m < 3; ++m) {
      SiteParams p = random_site(rng, 2, 3);
      p.beta *= 0.3;
      p.gamma *= 0.6;
      res[i].draws.push_back(p);
    }
  }
  // Exact marginal over record pairs with the spatial variances integrated out.
  auto log_prior = [&](const SiteParams& p) {
    return normal_log_pdf(p.beta(0), 0.0, 9.0) + normal_log_pdf(p.beta(1), 0.0, 9.0) + logistic_log_pdf(p.gamma);
  };
  std::vector<double> exact(9);
  double total = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const SiteParams& u = res[0].draws[a];
      const SiteParams& v = res[1].draws[b];
      const double shape = hp.shape + 1.0;
      double lw = -log_prior(u) - log_prior(v);
      lw -= shape * std::log(hp.scale + 0.5 * std::pow(u.gamma - v.gamma, 2));
      for (int k = 0; k < 2; ++k) lw -= shape * std::log(hp.scale + 0.5 * std::pow(u.beta(k) - v.beta(k), 2));
      exact[a * 3 + b] = std::exp(lw);
      total += exact[a * 3 + b];
    }
  for (double& e : exact) e /= total;

  // 1e6 sweeps after burn-in, every tenth state kept.
  Stage2Config cfg;
  cfg.chain = {1001000, 1000, 10, 41};
  Rng chain(cfg.chain.seed);
  const auto r = run_stage2(res, g, cfg, prior, chain);
  std::vector<double> freq(9, 0.0);
  for (std::size_t m = 0; m < r.store.n_draws(); ++m) freq[r.record_index[0][m] * 3 + r.record_index[1][m]] += 1.0;
  double tv = 0.0, lo = 1.0, hi = 0.0;
  for (int k = 0; k < 9; ++k) {
    tv += 0.5 * std::abs(freq[k] / static_cast<double>(r.store.n_draws()) - exact[k]);
    lo = std::min(lo, exact[k]);
    hi = std::max(hi, exact[k]);
  }
  return {tv < 0.05, "total variation " + fmt(tv, 3) + " over 1e6 sweeps (need < 0.05); exact cell masses " +
                         fmt(lo, 3) + ".." + fmt(hi, 3)};
}

// ---------------------------------------------------------------------------

Outcome criterion5() {
  const auto grid = rectangular_grid(5, 10);
  const auto data = simulate_dataset(grid, 300, 1, 5, TruthSpec::standard(1), 505);
  const auto g = LatticeGraph::queen(grid);
  const Cutoffs c(5);
  const auto prior = Stage1Prior::standard(2);
  const auto s1 = run_stage1_all(data.panels, c, prior, {20000, 4000, 8, 51}, 4);
  if (!s1.failures.empty()) return {false, "stage one failed at site " + std::to_string(s1.failures[0].site_id)};
  Stage2Config cfg;
  cfg.chain = {20000, 4000, 8, 52};
  Rng rng(cfg.chain.seed);
  const auto s2 = run_stage2(s1.reservoirs, g, cfg, prior, rng);

  std::map<std::string, std::pair<int, int>> cover;
  auto check = [&](const std::string& cls, std::vector<double> v, double truth) {
    std::sort(v.begin(), v.end());
    const double lo = v[static_cast<std::size_t>(0.025 * static_cast<double>(v.size() - 1))];
    const double hi = v[static_cast<std::size_t>(std::ceil(0.975 * static_cast<double>(v.size() - 1)))];
    auto& [hit, n] = cover[cls];
    hit += (truth >= lo && truth <= hi) ? 1 : 0;
    ++n;
  };
  for (std::size_t i = 0; i < 50; ++i) {
    const auto& truth = data.truth.sites[i];
    const auto& draws = s2.store.draws[i];
    for (Eigen::Index p = 0; p < 2; ++p) {
      std::vector<double> v;
      for (const auto& d : draws) v.push_back(d.beta(p));
      check("beta", v, truth.beta(p));
    }
    std::vector<double> r, s;
    for (const auto& d : draws) {
      r.push_back(d.rho());
      s.push_back(d.sigma2);
    }
    check("rho", r, truth.rho());
    check("sigma2", s, truth.sigma2);
  }
  bool ok = true;
  std::string parts;
  for (const auto& [cls, hn] : cover) {
    const double rate = static_cast<double>(hn.first) / static_cast<double>(hn.second);
    ok = ok && rate >= 0.85;
    parts += (parts.empty() ? "" : ", ") + cls + " " + std::to_string(hn.first) + "/" + std::to_string(hn.second);
  }
  return {ok, "95% interval coverage " + parts + " (need >= 85% per class)"};
}

// ---------------------------------------------------------------------------

Outcome criterion6() {
  Rng rng(606);
  const std::size_t n = 100000;
  std::vector<double> iid(n), ar(n);
  for (double& v : iid) v = rng.normal();
  const double phi = 0.9;
  double x = rng.normal() / std::sqrt(1 - phi * phi);
  for (double& v : ar) {
    x = phi * x + rng.normal();
    v = x;
  }
  const double r_iid = effective_sample_size(iid).ess / static_cast<double>(n);
  const double target = static_cast<double>(n) * (1 - phi) / (1 + phi);
  const double r_ar = effective_sample_size(ar).ess / target;
  return {r_iid >= 0.8 && r_iid <= 1.2 && std::abs(r_ar - 1.0) <= 0.2,
          "iid ESS/N = " + fmt(r_iid) + " (need 0.8..1.2); AR(0.9) ESS/target = " + fmt(r_ar) + " (need within 20%)"};
}

// ---------------------------------------------------------------------------

Outcome criterion7(const Benchmark& b) {
  const double two = b.t_stage1_w4 + b.t_stage2;
  const double ratio = b.t_stage1_w4 / b.t_stage1_w1;
  const bool same_draws = b.stage2.store.n_draws() == b.single.store.n_draws();
  bool identical = b.stage1_w1.reservoirs.size() == b.stage1_w4.reservoirs.size();
  for (std::size_t i = 0; identical && i < b.stage1_w1.reservoirs.size(); ++i)
    identical = b.stage1_w1.reservoirs[i].draws == b.stage1_w4.reservoirs[i].draws;
  return {same_draws && two < b.t_single && ratio < 0.45,
          "two-stage " + fmt(two) + " s vs single-stage " + fmt(b.t_single) + " s (" +
              std::to_string(b.single.store.n_draws()) + " retained draws each); stage one 4 workers / 1 worker = " +
              fmt(ratio) + " (need < 0.45); hardware threads " + std::to_string(std::thread::hardware_concurrency()) +
              (identical ? "" : "; worker outputs differ")};
}

// ---------------------------------------------------------------------------

Outcome criterion8() {
  const std::size_t train = 100, horizon = 13;
  TruthSpec spec = TruthSpec::standard(1);
  spec.gamma_mean = logit(0.95);
  spec.gamma_icar_var = 0.02;
  spec.t_train = train;
  const auto grid = rectangular_grid(4, 4);
  const auto data = simulate_dataset(grid, train + horizon, 1, 5, spec, 808);
  const auto g = LatticeGraph::queen(grid);
  const Cutoffs c(5);
  const auto prior = Stage1Prior::standard(2);

  std::vector<SitePanel> training;
  std::vector<Eigen::MatrixXd> detrended;
  std::vector<FourierFit> fits;
  std::vector<int> ids;
  Eigen::MatrixXi holdout(16, static_cast<Eigen::Index>(horizon));
  for (std::size_t i = 0; i < 16; ++i) {
    const auto& p = data.panels[i];
    SitePanel tp{p.site_id, std::vector<int>(p.y.begin(), p.y.begin() + static_cast<std::ptrdiff_t>(train)),
                 p.x.topRows(static_cast<Eigen::Index>(train))};
    for (std::size_t h = 0; h < horizon; ++h) holdout(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(h)) = p.y[train + h];
    auto d = fit_fourier_detrend(tp.x.rightCols(1), p.site_id);
    detrended.push_back(d.detrended);
    fits.push_back(d.fit);
    ids.push_back(p.site_id);
    training.push_back(std::move(tp));
  }
  const ChainConfig chain{20000, 5000, 10, 81};
  const auto s1 = run_stage1_all(training, c, prior, chain, 4);
  Stage2Config s2c;
  s2c.chain = {20000, 5000, 10, 82};
  Rng r2(s2c.chain.seed);
  const auto s2 = run_stage2(s1.reservoirs, g, s2c, prior, r2);
  const auto v1 = var_stage1_all(detrended, ids, {20000, 5000, 10, 83}, VarPrior{}, 4);
  VarStage2Config v2c;
  v2c.chain = {20000, 5000, 10, 84};
  Rng r3(v2c.chain.seed);
  const auto v2 = var_stage2(v1.reservoirs, g, v2c, VarPrior{}, r3);

  std::vector<ForecastSite> sites;
  for (std::size_t i = 0; i < 16; ++i) sites.push_back({&training[i], &fits[i]});
  const auto draws = forecast_drought(s2.store, v2.store, sites, c, horizon, 85, 4);
  const auto w = within_one_probability(draws, holdout);
  const double h1 = w.mean_by_horizon(0), h13 = w.mean_by_horizon(static_cast<Eigen::Index>(horizon - 1));
  return {h1 - h13 >= 0.05,
          "within-one probability h1 = " + fmt(h1) + ", h13 = " + fmt(h13) + ", drop " + fmt(h1 - h13) + " (need >= 0.05)"};
}

// ---------------------------------------------------------------------------

Outcome criterion9(const Benchmark& b) {
  double ortho = 0.0;
  std::vector<Eigen::MatrixXd> detrended;
  std::vector<int> ids;
  for (const auto& p : b.data.panels) {
    const auto d = fit_fourier_detrend(p.x.rightCols(1), p.site_id);
    Eigen::MatrixXd design(p.x.rows(), kFourierTerms);
    for (Eigen::Index t = 0; t < p.x.rows(); ++t) design.row(t) = fourier_design_row(static_cast<double>(t + 1));
    ortho = std::max(ortho, (design.transpose() * d.detrended).cwiseAbs().maxCoeff());
    detrended.push_back(d.detrended);
    ids.push_back(p.site_id);
  }
  Rng rng(909);
  const double ks = iw_ks(rng);

  const auto v1 = var_stage1_all(detrended, ids, {20000, 5000, 10, 91}, VarPrior{}, 4);
  VarStage2Config cfg;
  cfg.chain = {20000, 5000, 10, 92};
  Rng r2(cfg.chain.seed);
  const auto two = var_stage2(v1.reservoirs, b.graph, cfg, VarPrior{}, r2);
  cfg.chain.seed = 93;
  Rng r3(cfg.chain.seed);
  const auto single = var_single_stage(detrended, b.graph, cfg, r3);
  std::size_t within = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::vector<double> a, s;
    for (const auto& d : two.store.draws[i]) a.push_back(d.delta(0));
    for (const auto& d : single.draws[i]) s.push_back(d.delta(0));
    const auto sa = summarize_chain(a, ids[i], "delta1");
    const auto ss = summarize_chain(s, ids[i], "delta1");
    const double z = std::abs(sa.mean - ss.mean) / std::hypot(sa.mcse, ss.mcse);
    worst = std::max(worst, z);
    within += z <= 3.0 ? 1 : 0;
  }
  return {ortho < 1e-8 && ks < 0.02 && within == ids.size(),
          "Fourier max |residual'column| = " + fmt(ortho, 3) + " (need < 1e-8); IW KS = " + fmt(ks, 3) +
              " (need < 0.02); delta means within 3 MCSE at " + std::to_string(within) + "/" +
              std::to_string(ids.size()) + " sites, largest gap " + fmt(worst, 3)};
}

// ---------------------------------------------------------------------------

int run(const std::string& args) {
  const std::string cmd = std::string(ORDST_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Compares every regular file under two directories except wall-clock outputs.
bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  auto list = [](const fs::path& root) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (!e.is_regular_file()) continue;
      const auto name = e.path().filename().string();
      if (name == "timing.json" || name == "efficiency.csv") continue;
      out.push_back(fs::relative(e.path(), root));
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  const auto la = list(a), lb = list(b);
  if (la != lb) {
    why = a.filename().string() + " vs " + b.filename().string() + ": file lists differ";
    return false;
  }
  if (la.empty()) {
    why = a.filename().string() + ": no outputs";
    return false;
  }
  for (const auto& f : la)
    if (!io::files_identical(a / f, b / f)) {
      why = (a.filename() / f).string() + " differs";
      return false;
    }
  return true;
}

Outcome criterion10() {
  std::random_device rd;
  const fs::path root = fs::temp_directory_path() / ("ordst_accept_" + std::to_string(rd()));
  fs::create_directories(root);
  const std::string r = root.string() + "/";
  const std::string data = " --data " + r + "sim/data.csv --sites " + r + "sim/sites.csv --t-train 50";
  const std::string chain = " --iters 2000 --burnin 500 --thin 5";
  std::vector<std::pair<std::string, std::string>> steps;
  auto both = [&](const std::string& name, const std::string& args) {
    steps.emplace_back(name + "_a", args + " --out " + r + name + "_a");
    steps.emplace_back(name + "_b", args + " --out " + r + name + "_b");
  };
  both("sim", "simulate --rows 3 --cols 3 --weeks 60 --covariates 2 --seed 7 --t-train 50");
  steps.emplace_back("sim", "simulate --rows 3 --cols 3 --weeks 60 --covariates 2 --seed 7 --t-train 50 --out " + r + "sim");
  steps.emplace_back("s1_a", "stage1" + data + chain + " --seed 3 --workers 1 --out " + r + "s1_a");
  steps.emplace_back("s1_b", "stage1" + data + chain + " --seed 3 --workers 4 --out " + r + "s1_b");
  steps.emplace_back("s1_c", "stage1" + data + chain + " --seed 3 --workers 1 --out " + r + "s1_c");
  both("s2", "stage2 --sites " + r + "sim/sites.csv --reservoirs " + r + "s1_a" + chain + " --seed 4");
  both("ss", "single-stage" + data + chain + " --seed 5");
  steps.emplace_back("cf_a", "covfit" + data + chain + " --seed 6 --workers 1 --out " + r + "cf_a");
  steps.emplace_back("cf_b", "covfit" + data + chain + " --seed 6 --workers 4 --out " + r + "cf_b");
  const std::string fc = "forecast" + data + " --horizon 10 --seed 8 --posterior " + r + "s2_a --covariates " + r + "cf_a";
  steps.emplace_back("fc_a", fc + " --workers 1 --out " + r + "fc_a");
  steps.emplace_back("fc_b", fc + " --workers 4 --out " + r + "fc_b");
  both("dg", "diagnose --store " + r + "s2_a");
  both("cmp", "diagnose --compare " + r + "s2_a " + r + "ss_a");

  for (const auto& [name, args] : steps)
    if (run(args) != 0) {
      fs::remove_all(root);
      return {false, "command failed: ordst " + args};
    }
  std::string why;
  bool ok = true;
  const std::vector<std::pair<std::string, std::string>> pairs{
      {"sim_a", "sim_b"}, {"s1_a", "s1_b"}, {"s1_a", "s1_c"}, {"s2_a", "s2_b"}, {"ss_a", "ss_b"},
      {"cf_a", "cf_b"},   {"fc_a", "fc_b"}, {"dg_a", "dg_b"}, {"cmp_a", "cmp_b"}};
  for (const auto& [a, b] : pairs) {
    ok = same_tree(root / a, root / b, why);
    if (!ok) break;
  }
  fs::remove_all(root);
  return {ok, ok ? "simulate, stage1 (1 and 4 workers), stage2, single-stage, covfit (1 and 4 workers), forecast "
                   "(1 and 4 workers) and diagnose outputs byte-identical across runs"
                 : why};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int k, const Outcome& o, double secs) {
    std::cout << "AC" << k << " " << (o.pass ? "PASS" : "FAIL") << ": " << o.detail << " [" << fmt(secs, 3) << " s]"
              << std::endl;
    failed += o.pass ? 0 : 1;
  };
  auto step = [&](int k, const std::function<Outcome()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    report(k, o, seconds_since(t0));
  };

  Benchmark bench;
  const auto t0 = std::chrono::steady_clock::now();
  std::string bench_error;
  try {
    bench.run();
  } catch (const std::exception& e) {
    bench_error = e.what();
  }
  const double bench_secs = seconds_since(t0);
  auto with_bench = [&](const std::function<Outcome()>& f) {
    return [&, f] { return bench_error.empty() ? f() : Outcome{false, "benchmark failed: " + bench_error}; };
  };

  report(1, bench_error.empty() ? criterion1(bench) : Outcome{false, "benchmark failed: " + bench_error}, bench_secs);
  step(2, criterion2);
  step(3, criterion3);
  step(4, criterion4);
  step(5, criterion5);
  step(6, criterion6);
  step(7, with_bench([&] { return criterion7(bench); }));
  step(8, criterion8);
  step(9, with_bench([&] { return criterion9(bench); }));
  step(10, criterion10);
  std::cout << failed << " of 10 criteria failed" << std::endl;
  return failed == 0 ? 0 : 1;
}
