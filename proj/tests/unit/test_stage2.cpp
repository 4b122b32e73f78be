#include <doctest.h>

#include <boost/math/distributions/gamma.hpp>
#include <cmath>
#include <set>

#include "../support.hpp"
#include "ordst/error.hpp"
#include "ordst/stage2.hpp"
#include "ordst/synthetic.hpp"

using namespace ordst;
namespace ts = testing_support;

namespace {

SiteParams random_params(Rng& rng, Eigen::Index k, Eigen::Index t) {
  SiteParams p;
  p.beta = Eigen::VectorXd(k);
  for (Eigen::Index j = 0; j < k; ++j) p.beta(j) = rng.normal() * 2.0;
  p.gamma = rng.normal();
  p.sigma2 = 0.3 + rng.uniform() * 2.0;
  p.z = Eigen::VectorXd(t);
  for (Eigen::Index s = 0; s < t; ++s) p.z(s) = rng.normal() * 2.0;
  return p;
}

FullModelState random_state(Rng& rng, std::size_t n, Eigen::Index k, Eigen::Index t) {
  FullModelState s;
  for (std::size_t i = 0; i < n; ++i) s.sites.push_back(random_params(rng, k, t));
  s.hyper.sigma2_gamma = 0.1 + rng.uniform() * 3.0;
  s.hyper.sigma2_beta = Eigen::VectorXd(k);
  for (Eigen::Index j = 0; j < k; ++j) s.hyper.sigma2_beta(j) = 0.1 + rng.uniform() * 3.0;
  return s;
}

double icar_joint(const FullModelState& s, const LatticeGraph& g) {
  double lp = icar_log_density_unnormalized(s.gamma_field(), s.hyper.sigma2_gamma, g);
  for (Eigen::Index p = 0; p < s.hyper.sigma2_beta.size(); ++p)
    lp += icar_log_density_unnormalized(s.beta_field(p), s.hyper.sigma2_beta(p), g);
  return lp;
}

}  // namespace

TEST_CASE("hypervariance conditional examples") {
  const auto g4 = LatticeGraph::queen(rectangular_grid(2, 2));
  std::vector<double> constant(4, 1.7);
  const auto ig = hypervariance_conditional(constant, g4, HyperPrior{});
  CHECK(ig.shape == 2.5);
  CHECK(ig.scale == 0.5);
  CHECK(ig.scale / (ig.shape - 1.0) == doctest::Approx(1.0 / 3.0));

  const LatticeGraph two({{1}, {0}});
  std::vector<double> v{0.0, 2.0};
  const auto ig2 = hypervariance_conditional(v, two, HyperPrior{});
  CHECK(ig2.shape == 1.5);
  CHECK(ig2.scale == 2.5);
}

TEST_CASE("hypervariance draws match a griddy oracle") {
  const auto g = LatticeGraph::queen(rectangular_grid(3, 3));
  Rng rng(1);
  std::vector<double> field(9);
  for (double& x : field) x = rng.normal();
  std::vector<double> s(50000);
  for (double& x : s) x = gibbs_update_hypervariance(field, g, HyperPrior{}, rng);
  const auto ig = hypervariance_conditional(field, g, HyperPrior{});
  ts::GriddyCdf cdf(
      [&](double v) {
        return -0.5 * 9.0 * std::log(v) + icar_log_density_unnormalized(field, v, g) + inv_gamma_log_pdf(v, 0.5, 0.5);
      },
      1e-6, 60.0 * ig.scale / (ig.shape + 1.0), 20000);
  CHECK(ts::ks_distance(s, cdf) < 0.02);
}

TEST_CASE("hypervariance scale: incremental update equals recomputation") {
  const auto g = LatticeGraph::queen(rectangular_grid(5, 5));
  Rng rng(2);
  std::vector<double> v(25);
  for (double& x : v) x = rng.normal();
  double q = icar_pairwise_sum(v, g);
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t i = rng.index(25);
    const double nv = rng.normal() * 3.0;
    for (std::size_t j : g.neighbors(i)) q += (nv - v[j]) * (nv - v[j]) - (v[i] - v[j]) * (v[i] - v[j]);
    v[i] = nv;
  }
  CHECK(std::abs(q - icar_pairwise_sum(v, g)) < 1e-10);
}

TEST_CASE("log acceptance ratio: identity, scalar oracle and flat limit") {
  const LatticeGraph two({{1}, {0}});
  Rng rng(3);
  FullModelState s = random_state(rng, 2, 2, 4);
  const auto prior = Stage1Prior::standard(2);
  CHECK(log_acceptance_ratio(s.sites[0], s.sites[0], 0, s, two, prior) == 0.0);

  const SiteParams prop = random_params(rng, 2, 4);
  const SiteParams& cur = s.sites[0];
  const SiteParams& nb = s.sites[1];
  auto gauss = [](double x, double m, double v) { return -0.5 * std::log(2 * M_PI * v) - (x - m) * (x - m) / (2 * v); };
  auto logistic = [](double g) { return -g - 2.0 * std::log1p(std::exp(-g)); };
  auto side = [&](const SiteParams& p) {
    double v = gauss(p.gamma, nb.gamma, s.hyper.sigma2_gamma);
    for (int k = 0; k < 2; ++k) v += gauss(p.beta(k), nb.beta(k), s.hyper.sigma2_beta(k));
    return v - logistic(p.gamma) - gauss(p.beta(0), 0, 9) - gauss(p.beta(1), 0, 9);
  };
  CHECK(std::abs(log_acceptance_ratio(prop, cur, 0, s, two, prior) - (side(prop) - side(cur))) < 1e-12);

  s.hyper.sigma2_gamma = 1e8;
  s.hyper.sigma2_beta.setConstant(1e8);
  const double stage1_diff = (logistic(cur.gamma) + gauss(cur.beta(0), 0, 9) + gauss(cur.beta(1), 0, 9)) -
                             (logistic(prop.gamma) + gauss(prop.beta(0), 0, 9) + gauss(prop.beta(1), 0, 9));
  CHECK(std::abs(log_acceptance_ratio(prop, cur, 0, s, two, prior) - stage1_diff) < 1e-4);
}

TEST_CASE("expanded and simplified acceptance ratios agree") {
  const auto g = LatticeGraph::queen(rectangular_grid(3, 3));
  Rng rng(4);
  const auto prior = Stage1Prior::standard(2);
  const Eigen::MatrixXd x = ts::random_design(rng, 12, 1);
  for (int rep = 0; rep < 1000; ++rep) {
    FullModelState s = random_state(rng, 9, 2, 12);
    const std::size_t i = rng.index(9);
    const SiteParams prop = random_params(rng, 2, 12);
    const SiteParams cur = s.sites[i];
    // Full model density of the state with site i set to `p`, divided by the
    // stage-one posterior kernel of `p`. Likelihood indicators are 1 for both.
    auto term = [&](const SiteParams& p) {
      FullModelState t = s;
      t.sites[i] = p;
      const double full = ar1_log_density(p.z, p.beta, p.gamma, p.sigma2, x) + icar_joint(t, g) +
                          inv_gamma_log_pdf(p.sigma2, prior.ig_shape, prior.ig_scale);
      const double q = ar1_log_density(p.z, p.beta, p.gamma, p.sigma2, x) + stage1_log_prior(p, prior);
      return full - q;
    };
    const double expanded = term(prop) - term(cur);
    CHECK(std::abs(expanded - log_acceptance_ratio(prop, cur, i, s, g, prior)) < 1e-10);
  }
}

TEST_CASE("MH site update: singleton reservoir and empirical acceptance rate") {
  const auto g = LatticeGraph::queen(rectangular_grid(4, 4));
  Rng rng(5);
  const auto prior = Stage1Prior::standard(2);
  FullModelState s = random_state(rng, 16, 2, 5);
  Reservoir single;
  single.site_id = 1;
  single.draws = {s.sites[0]};
  const auto before = s.sites[0];
  const auto out = mh_update_site(0, s, single, g, prior, rng);
  CHECK(out.accepted);
  CHECK(s.sites[0] == before);

  Reservoir empty;
  CHECK_THROWS_AS(mh_update_site(0, s, empty, g, prior, rng), Error);

  // Binomial test: acceptance frequency against the mean of min(1, R).
  Reservoir pool;
  pool.site_id = 6;
  for (int k = 0; k < 20; ++k) {
    SiteParams p = s.sites[5];
    p.beta(0) += 0.6 * rng.normal();
    p.gamma += 0.6 * rng.normal();
    pool.draws.push_back(p);
  }
  const SiteParams start = s.sites[5];
  double expected = 0.0, var = 0.0;
  for (const auto& p : pool.draws) {
    const double a = std::min(1.0, std::exp(log_acceptance_ratio(p, start, 5, s, g, prior)));
    expected += a / 20.0;
    var += a * (1 - a) / 20.0;
  }
  const int n = 10000;
  int accepted = 0;
  for (int k = 0; k < n; ++k) {
    s.sites[5] = start;
    accepted += mh_update_site(5, s, pool, g, prior, rng).accepted ? 1 : 0;
  }
  // Accept indicator has variance p(1 - p) with p the pooled mean.
  const double sd = std::sqrt(n * expected * (1 - expected));
  CHECK(std::abs(accepted - n * expected) < 4.0 * sd);
}

namespace {

std::vector<Reservoir> small_reservoirs(std::size_t n, std::size_t size, Rng& rng) {
  std::vector<Reservoir> out;
  for (std::size_t i = 0; i < n; ++i) {
    Reservoir r;
    r.site_id = static_cast<int>(i + 1);
    for (std::size_t m = 0; m < size; ++m) r.draws.push_back(random_params(rng, 2, 3));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

TEST_CASE("stage two: zero iterations, determinism and swap-only draws") {
  const auto g = LatticeGraph::queen(rectangular_grid(3, 3));
  Rng gen(6);
  const auto res = small_reservoirs(9, 30, gen);
  const auto prior = Stage1Prior::standard(2);
  Stage2Config cfg;
  cfg.chain = {0, 0, 1, 1};
  Rng r0(1);
  const auto zero = run_stage2(res, g, cfg, prior, r0);
  CHECK(zero.store.n_draws() == 0);
  for (std::size_t i = 0; i < 9; ++i) CHECK(zero.final_state.sites[i] == res[i].draws.back());
  CHECK(zero.final_state.hyper.sigma2_gamma == 1.0);

  cfg.chain = {400, 100, 3, 1};
  Rng a(9), b(9);
  const auto r1 = run_stage2(res, g, cfg, prior, a);
  const auto r2 = run_stage2(res, g, cfg, prior, b);
  REQUIRE(r1.store.n_draws() == cfg.chain.retained());
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t m = 0; m < r1.store.n_draws(); ++m) {
      CHECK(r1.store.draws[i][m] == r2.store.draws[i][m]);
      CHECK(r1.store.draws[i][m] == res[i].draws[r1.record_index[i][m]]);
    }
  for (std::size_t m = 0; m < r1.store.n_draws(); ++m) CHECK(r1.store.hyper[m].sigma2_gamma == r2.store.hyper[m].sigma2_gamma);
  for (std::size_t i = 0; i < 9; ++i) CHECK(r1.stats.accepted[i] <= r1.stats.proposed[i]);

  cfg.random_scan = true;
  Rng c(9);
  CHECK_NOTHROW(run_stage2(res, g, cfg, prior, c));

  auto bad = res;
  std::swap(bad[0], bad[1]);
  Rng d(1);
  CHECK_THROWS_AS(run_stage2(bad, g, cfg, prior, d), Error);
  bad = res;
  bad.pop_back();
  CHECK_THROWS_AS(run_stage2(bad, g, cfg, prior, d), Error);
}

TEST_CASE("stage two warns about low acceptance") {
  const LatticeGraph two({{1}, {0}});
  Rng gen(7);
  auto res = small_reservoirs(2, 50, gen);
  // One record far from everything else: proposals are almost never accepted
  // once the chain sits at a high-density record.
  for (auto& d : res[0].draws) d.gamma = 30.0 + gen.normal();
  res[0].draws.back().gamma = 0.0;
  res[1].draws.back().gamma = 0.0;
  Stage2Config cfg;
  cfg.chain = {300, 50, 1, 1};
  cfg.low_acceptance_alarm = 0.5;
  Rng r(3);
  const auto out = run_stage2(res, two, cfg, Stage1Prior::standard(2), r);
  bool found = false;
  for (const auto& w : out.warnings) found = found || w.rfind("W_LOW_ACCEPTANCE", 0) == 0;
  CHECK(found);
}
