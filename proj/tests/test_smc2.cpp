#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "epismc/pipeline.hpp"
#include "epismc/smc2.hpp"

using namespace epismc;

namespace {

// Deterministic engine whose "likelihood" is a pure function of theta, for
// exercising the driver logic without Monte Carlo noise.
struct FakeModel {
  double rate = 1.0;
};

template <int Tag>
struct FakeEngine {
  using Model = FakeModel;
  struct State {
    int steps = 0;
  };
  static State init(const Model&, int, RngKey, const EngineOptions&) { return {}; }
  static double step(State& s, const Model& m, double y, RngKey, const EngineOptions&) {
    ++s.steps;
    if (m.rate <= 0) return kLogZero;
    const double d = m.rate - y;
    return -0.5 * d * d;
  }
  template <class Fn>
  static void for_each_member(const State&, Fn&&) {}
};

PriorSpec alpha_uniform_prior(double lo = 0.0, double hi = 10.0) {
  PriorSpec prior;
  prior.marginals[0] = PriorMarginal::uniform(lo, hi);
  return prior;
}

FakeModel fake_from_theta(const ParamVector& th) { return FakeModel{th.alpha}; }

ParamVector theta_alpha(double a) {
  ParamVector th;
  th.alpha = a;
  return th;
}

Smc2Options fake_options(int n_theta, double ess_frac = 0.5) {
  Smc2Options opt;
  opt.n_theta = n_theta;
  opt.n_inner = 10;
  opt.pmmh_moves = 2;
  opt.ess_threshold_frac = ess_frac;
  return opt;
}

struct LogRateEngine {
  using Model = FakeModel;
  struct State {};
  static State init(const Model&, int, RngKey, const EngineOptions&) { return {}; }
  static double step(State&, const Model& m, double, RngKey, const EngineOptions&) {
    return std::log(m.rate);
  }
  template <class Fn>
  static void for_each_member(const State&, Fn&&) {}
};

}  // namespace

TEST_CASE("weight update after one observation") {
  // increments exp(-0.5 (rate-y)^2); with rates {2, 1} and y = 2 the
  // un-normalized weights are 1 and exp(-0.5)
  auto opt = fake_options(2, 0.0);
  opt.initial_thetas = {theta_alpha(2.0), theta_alpha(1.0)};
  Smc2Driver<FakeEngine<0>> driver(fake_from_theta, alpha_uniform_prior(), opt);
  const auto res = driver.run({2.0}, RngKey{1, 0});
  REQUIRE(res.completed);
  const auto w = res.normalized_weights();
  const double expect0 = 1.0 / (1.0 + std::exp(-0.5));
  CHECK(w[0] == doctest::Approx(expect0).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(1 - expect0).epsilon(1e-12));
}

TEST_CASE("two increments of log 2 and log 1 give weights 2/3 and 1/3") {
  auto opt = fake_options(2, 0.0);
  opt.initial_thetas = {theta_alpha(2.0), theta_alpha(1.0)};
  Smc2Driver<LogRateEngine> driver(fake_from_theta, alpha_uniform_prior(), opt);
  const auto res = driver.run({0.0}, RngKey{2, 0});
  const auto w = res.normalized_weights();
  CHECK(w[0] == doctest::Approx(2.0 / 3));
  CHECK(w[1] == doctest::Approx(1.0 / 3));
}

TEST_CASE("log-zero increment zeroes the particle weight") {
  auto opt = fake_options(3, 0.0);
  opt.initial_thetas = {theta_alpha(1.0), theta_alpha(-1.0), theta_alpha(1.5)};
  Smc2Driver<FakeEngine<0>> driver(fake_from_theta, alpha_uniform_prior(-5, 10), opt);
  const auto res = driver.run({1.0}, RngKey{3, 0});
  REQUIRE(res.completed);
  const auto w = res.normalized_weights();
  CHECK(w[1] == 0.0);
  CHECK(w[0] + w[2] == doctest::Approx(1.0));
}

TEST_CASE("all particles failing aborts with partial history") {
  auto opt = fake_options(2, 0.0);
  opt.initial_thetas = {theta_alpha(-1.0), theta_alpha(-2.0)};
  Smc2Driver<FakeEngine<0>> driver(fake_from_theta, alpha_uniform_prior(-5, 10), opt);
  const auto res = driver.run({1.0, 1.0}, RngKey{4, 0});
  CHECK_FALSE(res.completed);
  CHECK(res.abort_step == 0);
  CHECK(res.history.empty());
}

TEST_CASE("no observations returns the prior sample untouched") {
  Smc2Options opt = fake_options(50);
  const PriorSpec prior = alpha_uniform_prior(0, 1);
  Smc2Driver<FakeEngine<0>> driver(fake_from_theta, prior, opt);
  const auto res = driver.run({}, RngKey{5, 0});
  REQUIRE(res.completed);
  REQUIRE(res.particles.size() == 50);
  for (int m = 0; m < 50; ++m) {
    RngStream rs(RngKey{5, 0}.child(smc2_detail::kThetaInitTag, m));
    CHECK(res.particles[m].theta.alpha == prior.sample(rs).alpha);
    CHECK(std::exp(res.particles[m].log_weight) == doctest::Approx(0.02));
  }
  CHECK(res.history.empty());
}

TEST_CASE("pmmh acceptance ratio formula") {
  CHECK(pmmh_log_ratio(-10, -1, -2, -10, -1, -2) == 0.0);
  CHECK(pmmh_log_ratio(-9, -1, -2, -10, -1, -2) == doctest::Approx(1.0));
  CHECK(pmmh_log_ratio(-9, kLogZero, -2, -10, -1, -2) == kLogZero);
}

TEST_CASE("ess trigger fires exactly below the threshold and resets weights") {
  auto opt = fake_options(40, 0.5);
  opt.checkpoint_steps = {0, 1, 2, 3, 4, 5, 6, 7};
  Smc2Driver<FakeEngine<0>> driver(fake_from_theta, alpha_uniform_prior(0.0, 6.0), opt);
  const std::vector<double> obs{2.0, 2.1, 1.9, 2.0, 2.2, 1.8, 2.0, 2.05};
  const auto res = driver.run(obs, RngKey{6, 0});
  REQUIRE(res.completed);
  bool saw_rejuvenation = false;
  for (const auto& sd : res.diag.steps) {
    CHECK(sd.rejuvenated == (sd.ess < 0.5 * 40));
    if (sd.rejuvenated) {
      saw_rejuvenation = true;
      // the snapshot taken after this step must hold exactly uniform weights
      for (const auto& cp : res.checkpoints)
        if (cp.t == sd.t)
          for (double w : cp.weights) CHECK(w == doctest::Approx(1.0 / 40).epsilon(1e-12));
    }
  }
  CHECK(saw_rejuvenation);
  CHECK(res.diag.n_rejuvenations > 0);
}

TEST_CASE("bookkeeping: cumulative likelihood equals an exact filter replay") {
  const ExamplePreset ex = example1();
  ExperimentConfig cfg = config_from_preset(ex);
  cfg.sim_T = 12;
  DataBundle bundle = assemble_data(cfg);

  Smc2Options opt;
  opt.n_theta = 8;
  opt.n_inner = 20;
  opt.ess_threshold_frac = 0.0;  // keep lineages untouched by rejuvenation
  const auto make_model = [&](const ParamVector& th) {
    return SeirSsm{th, cfg.model, cfg.init};
  };
  Smc2Driver<EnkfEngine<SeirSsm>> driver(make_model, cfg.prior, opt);
  const auto res = driver.run(bundle.observations, RngKey{7, 0});
  REQUIRE(res.completed);
  for (const auto& p : res.particles) {
    const auto replay = enkf_filter(bundle.observations, p.model, 20, p.lineage,
                                    EnkfOptions{});
    CHECK(std::abs(replay.total_loglik - p.cum_loglik) <= 1e-9);
  }
}

TEST_CASE("bookkeeping holds through rejuvenation with a deterministic engine") {
  auto opt = fake_options(30, 0.9);  // rejuvenate often
  Smc2Driver<FakeEngine<0>> driver(fake_from_theta, alpha_uniform_prior(0.0, 6.0), opt);
  const std::vector<double> obs{2.0, 1.0, 3.0, 2.0, 2.5};
  const auto res = driver.run(obs, RngKey{8, 0});
  REQUIRE(res.completed);
  CHECK(res.diag.n_rejuvenations > 0);
  for (const auto& p : res.particles) {
    // the fake likelihood of y_{1:t} is deterministic in theta
    double expect = 0;
    for (double y : obs) expect += -0.5 * (p.theta.alpha - y) * (p.theta.alpha - y);
    CHECK(p.cum_loglik == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("identical parameters keep the population ess high") {
  const ExamplePreset ex = example1();
  ExperimentConfig cfg = config_from_preset(ex);
  cfg.sim_T = 10;
  DataBundle bundle = assemble_data(cfg);
  const auto make_model = [&](const ParamVector& th) {
    return SeirSsm{th, cfg.model, cfg.init};
  };
  ParamVector shared = ex.true_theta;
  shared.nu_beta = 0.15;

  std::vector<double> final_ess;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Smc2Options opt;
    opt.n_theta = 30;
    opt.n_inner = 40;
    opt.ess_threshold_frac = 0.0;
    opt.initial_thetas.assign(30, shared);
    Smc2Driver<EnkfEngine<SeirSsm>> driver(make_model, cfg.prior, opt);
    const auto res = driver.run(bundle.observations, RngKey{seed, 40});
    REQUIRE(res.completed);
    final_ess.push_back(res.diag.steps.back().ess);
  }
  std::sort(final_ess.begin(), final_ess.end());
  CHECK(final_ess[final_ess.size() / 2] > 0.8 * 30);
}

TEST_CASE("build_proposal moments and scaling") {
  const std::vector<int> free{0};
  std::vector<ParamVector> thetas{theta_alpha(0.2), theta_alpha(0.4)};
  const std::vector<double> weights{0.5, 0.5};
  const auto p1 = build_proposal(thetas, weights, free, 1.0);
  CHECK(p1.mean[0] == doctest::Approx(0.3));
  CHECK(p1.cov.at(0, 0) == doctest::Approx(0.01).epsilon(1e-6));
  const auto p2 = build_proposal(thetas, weights, free, 2.0);
  CHECK(p2.cov.at(0, 0) == doctest::Approx(0.02).epsilon(1e-6));

  std::vector<ParamVector> same{theta_alpha(0.2), theta_alpha(0.2)};
  CHECK_THROWS_AS(build_proposal(same, weights, free, 1.0), proposal_error);
}

TEST_CASE("proposal density matches the scalar normal") {
  const std::vector<int> free{0};
  std::vector<ParamVector> thetas{theta_alpha(0.2), theta_alpha(0.4)};
  const std::vector<double> weights{0.5, 0.5};
  const auto p = build_proposal(thetas, weights, free, 1.0);
  const double var = p.cov.at(0, 0);
  const double x = 0.35;
  const double expect =
      -0.5 * (std::log(2 * M_PI * var) + (x - 0.3) * (x - 0.3) / var);
  CHECK(p.log_density(theta_alpha(x)) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("posterior summaries") {
  const std::vector<int> free{0};
  std::vector<ParamVector> thetas{theta_alpha(1), theta_alpha(2), theta_alpha(3)};
  const auto s = summarize_params(thetas, {1, 1, 1}, free);
  CHECK(s[0].mean == doctest::Approx(2.0));
  CHECK(s[0].q50 == doctest::Approx(2.0));

  std::vector<ParamVector> two{theta_alpha(5), theta_alpha(99)};
  const auto t = summarize_params(two, {1, 0}, free);
  CHECK(t[0].mean == doctest::Approx(5.0));
  CHECK(t[0].sd == doctest::Approx(0.0));
}

TEST_CASE("rejuvenation acceptance stays workable on a small fit") {
  const ExamplePreset ex = example1();
  ExperimentConfig cfg = config_from_preset(ex);
  cfg.sim_T = 30;
  cfg.n_theta = 60;
  cfg.n_inner = 40;
  cfg.threads = 1;
  DataBundle bundle = assemble_data(cfg);
  const auto artifacts = run_fit(cfg, bundle.observations, false);
  REQUIRE(artifacts.completed);
  double acc = 0;
  int count = 0;
  for (const auto& sd : artifacts.diagnostics.steps)
    if (sd.rejuvenated) {
      acc += sd.acceptance_rate;
      ++count;
    }
  REQUIRE(count > 0);
  CHECK(acc / count >= 0.01);
}

TEST_CASE("engine swap changes only the inner likelihood") {
  // two distinct engine types with identical deterministic behavior must
  // produce identical driver traces
  auto opt = fake_options(25, 0.6);
  Smc2Driver<FakeEngine<1>> a(fake_from_theta, alpha_uniform_prior(0, 6), opt);
  Smc2Driver<FakeEngine<2>> b(fake_from_theta, alpha_uniform_prior(0, 6), opt);
  const std::vector<double> obs{2.0, 1.5, 2.5, 2.0, 1.0, 3.0};
  const auto ra = a.run(obs, RngKey{9, 0});
  const auto rb = b.run(obs, RngKey{9, 0});
  REQUIRE(ra.diag.steps.size() == rb.diag.steps.size());
  for (std::size_t t = 0; t < ra.diag.steps.size(); ++t) {
    CHECK(ra.diag.steps[t].ess == rb.diag.steps[t].ess);
    CHECK(ra.diag.steps[t].rejuvenated == rb.diag.steps[t].rejuvenated);
    CHECK(ra.diag.steps[t].acceptance_rate == rb.diag.steps[t].acceptance_rate);
  }
  for (std::size_t m = 0; m < ra.particles.size(); ++m) {
    CHECK(ra.particles[m].theta.alpha == rb.particles[m].theta.alpha);
    CHECK(ra.particles[m].log_weight == rb.particles[m].log_weight);
  }
}

TEST_CASE("permuting the initial particles only adds monte carlo noise") {
  const ExamplePreset ex = example1();
  ExperimentConfig cfg = config_from_preset(ex);
  cfg.sim_T = 15;
  DataBundle bundle = assemble_data(cfg);
  const auto make_model = [&](const ParamVector& th) {
    return SeirSsm{th, cfg.model, cfg.init};
  };

  std::vector<double> diffs;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RngStream rs(RngKey{seed, 50});
    std::vector<ParamVector> thetas(24);
    for (auto& th : thetas) th = cfg.prior.sample(rs);
    std::vector<ParamVector> permuted = thetas;
    std::reverse(permuted.begin(), permuted.end());

    auto run_mean = [&](const std::vector<ParamVector>& init) {
      Smc2Options opt;
      opt.n_theta = 24;
      opt.n_inner = 30;
      opt.initial_thetas = init;
      Smc2Driver<EnkfEngine<SeirSsm>> driver(make_model, cfg.prior, opt);
      const auto res = driver.run(bundle.observations, RngKey{seed, 51});
      REQUIRE(res.completed);
      return res.history.back().params[0].mean;  // alpha
    };
    diffs.push_back(run_mean(permuted) - run_mean(thetas));
  }
  double mean = 0, var = 0;
  for (double d : diffs) mean += d / diffs.size();
  for (double d : diffs) var += (d - mean) * (d - mean) / (diffs.size() - 1);
  const double se = std::sqrt(var / diffs.size());
  CHECK(std::abs(mean) < 3 * se + 1e-12);
}
