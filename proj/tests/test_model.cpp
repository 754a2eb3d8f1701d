#include "doctest.h"

#include <cmath>
#include <vector>

#include "epismc/model.hpp"
#include "epismc/presets.hpp"

using namespace epismc;

namespace {

ModelConfig daily_poisson(double n = 500000) {
  ModelConfig cfg;
  cfg.N = n;
  cfg.rho = 1.0;
  cfg.obs = ObsModel::Poisson;
  return cfg;
}

}  // namespace

TEST_CASE("disease-free state is absorbing") {
  const ModelConfig cfg = daily_poisson();
  LatentState s{cfg.N, 0, 0, 0, 0, std::log(0.4)};
  ParamVector theta{0.5, 0.1, 0.0, 0, 0.4};
  RngStream rng(RngKey{1, 0});
  const LatentState next = transition(s, theta, cfg, rng);
  CHECK(next.S == doctest::Approx(cfg.N));
  CHECK(next.E == 0);
  CHECK(next.I == 0);
  CHECK(next.Z == 0);
  CHECK(next.log_beta == s.log_beta);
}

TEST_CASE("single Euler step arithmetic") {
  ModelConfig cfg = daily_poisson(1000);
  LatentState s{900, 100, 0, 0, 77, std::log(0.9)};
  ParamVector theta{0.5, 0.1, 0.0, 0, 0.9};
  RngStream rng(RngKey{2, 0});
  const LatentState next = transition(s, theta, cfg, rng);
  // no infectious individuals: the only flow is E -> I at rate alpha
  CHECK(next.Z == doctest::Approx(50.0));
  CHECK(next.E == doctest::Approx(50.0));
  CHECK(next.I == doctest::Approx(50.0));
  CHECK(next.S == doctest::Approx(900.0));
}

TEST_CASE("zero volatility leaves log beta untouched for any seed") {
  const ModelConfig cfg = daily_poisson();
  LatentState s{499000, 400, 500, 100, 0, std::log(0.3)};
  ParamVector theta{0.5, 0.14, 0.0, 0, 0.3};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RngStream rng(RngKey{seed, 0});
    CHECK(transition(s, theta, cfg, rng).log_beta == std::log(0.3));
  }
}

TEST_CASE("non-finite state is rejected") {
  const ModelConfig cfg = daily_poisson();
  LatentState s{std::numeric_limits<double>::quiet_NaN(), 0, 0, 0, 0, 0};
  ParamVector theta{0.5, 0.1, 0.1, 0, 1};
  RngStream rng(RngKey{3, 0});
  CHECK_THROWS_AS(transition(s, theta, cfg, rng), std::domain_error);
}

TEST_CASE("population is conserved along random transitions") {
  ModelConfig cfg = daily_poisson();
  cfg.n_substeps = 3;
  ParamVector theta{0.6, 0.2, 0.25, 0, 0.8};
  LatentState s{cfg.N - 50, 20, 30, 0, 0, std::log(0.8)};
  RngStream rng(RngKey{4, 0});
  for (int t = 0; t < 300; ++t) {
    s = transition(s, theta, cfg, rng);
    CHECK(std::abs(s.S + s.E + s.I + s.R - cfg.N) <= 1e-6 * cfg.N);
    CHECK(s.S >= 0);
    CHECK(s.E >= 0);
    CHECK(s.I >= 0);
    CHECK(s.R >= 0);
    CHECK(s.Z >= 0);
  }
}

TEST_CASE("clamping handles an overshooting configuration") {
  // gamma*dt > 1 forces I negative in one Euler step without the clamp
  ModelConfig cfg = daily_poisson(1000);
  ParamVector theta{0.1, 1.8, 0.0, 0, 0.1};
  LatentState s{500, 0, 500, 0, 0, std::log(0.1)};
  RngStream rng(RngKey{5, 0});
  const LatentState next = transition(s, theta, cfg, rng);
  CHECK(next.I >= 0);
  CHECK(std::abs(next.S + next.E + next.I + next.R - cfg.N) <= 1e-6 * cfg.N);
}

TEST_CASE("poisson observation log densities") {
  const ModelConfig cfg = daily_poisson();
  ParamVector theta{0.5, 0.1, 0, 0, 1};
  LatentState s;
  s.Z = 1.0;
  CHECK(obs_log_density(0, s, theta, cfg) == doctest::Approx(-1.0));
  s.Z = 2.0;
  CHECK(obs_log_density(3, s, theta, cfg) ==
        doctest::Approx(3 * std::log(2.0) - 2.0 - std::log(6.0)));
  CHECK_THROWS_AS(obs_log_density(-1, s, theta, cfg), std::domain_error);
}

TEST_CASE("negbin parameterization matches the mean-variance form") {
  ModelConfig cfg = daily_poisson();
  cfg.obs = ObsModel::NegBin;
  ParamVector theta{0.5, 0.1, 0, 0.02, 1};
  LatentState s;
  s.Z = 10.0;
  // implied variance 10 + 0.02*100 = 12 -> r = 50, p = 50/60 = 5/6
  CHECK(obs_conditional_variance(s, theta, cfg) == doctest::Approx(12.0));
  const double r = 50, p = 5.0 / 6.0;
  const int y = 7;
  const double direct = std::lgamma(y + r) - std::lgamma(r) - std::lgamma(y + 1.0) +
                        r * std::log(p) + y * std::log(1 - p);
  CHECK(obs_log_density(y, s, theta, cfg) == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("observation conditional variances") {
  ParamVector theta{0.5, 0.1, 0, 0.02, 1};
  LatentState s;
  ModelConfig cfg = daily_poisson();
  s.Z = 100;
  CHECK(obs_conditional_variance(s, theta, cfg) == doctest::Approx(100.0));
  cfg.obs = ObsModel::NegBin;
  cfg.rho = 0.5;
  s.Z = 200;
  CHECK(obs_conditional_variance(s, theta, cfg) == doctest::Approx(300.0));
  s.Z = 0;
  CHECK(obs_conditional_variance(s, theta, cfg) == 0.0);
}

TEST_CASE("negbin collapses to poisson as phi vanishes") {
  ModelConfig nbcfg = daily_poisson();
  nbcfg.obs = ObsModel::NegBin;
  const ModelConfig pois = daily_poisson();
  ParamVector theta{0.5, 0.1, 0, 1e-12, 1};
  ParamVector theta0{0.5, 0.1, 0, 0.0, 1};
  LatentState s;
  for (double z : {0.5, 10.0, 999.0, 10000.0}) {
    s.Z = z;
    for (std::int64_t y : {0L, 1L, 17L, 1000L}) {
      const double a = obs_log_density(y, s, theta, nbcfg);
      const double b = obs_log_density(y, s, theta0, pois);
      // the two distributions genuinely differ by ~phi*mu^2/2 in log scale,
      // so the tolerance carries that term for the largest means
      CHECK(std::abs(a - b) < 1e-6 + theta.phi * z * z);
    }
  }
}

TEST_CASE("poisson sampling mean matches a CLT band") {
  const ModelConfig cfg = daily_poisson();
  ParamVector theta{0.5, 0.1, 0, 0, 1};
  LatentState s;
  s.Z = 1000;
  RngStream rng(RngKey{6, 0});
  const int n = 100000;
  double mean = 0;
  for (int i = 0; i < n; ++i) mean += static_cast<double>(obs_sample(s, theta, cfg, rng));
  mean /= n;
  CHECK(std::abs(mean - 1000) < 5 * std::sqrt(1000.0 / n));
}

TEST_CASE("negbin sampling variance matches mu + phi mu^2") {
  ModelConfig cfg = daily_poisson();
  cfg.obs = ObsModel::NegBin;
  ParamVector theta{0.5, 0.1, 0, 0.05, 1};
  LatentState s;
  s.Z = 50;
  RngStream rng(RngKey{7, 0});
  const int n = 100000;
  double mean = 0, m2 = 0;
  for (int i = 0; i < n; ++i) {
    const double y = static_cast<double>(obs_sample(s, theta, cfg, rng));
    mean += y;
    m2 += y * y;
  }
  mean /= n;
  const double var = m2 / n - mean * mean;
  CHECK(std::abs(var - 175.0) < 0.1 * 175.0);
}

TEST_CASE("zero incidence draws zero counts") {
  const ModelConfig cfg = daily_poisson();
  ParamVector theta{0.5, 0.1, 0, 0, 1};
  LatentState s;
  s.Z = 0;
  RngStream rng(RngKey{8, 0});
  for (int i = 0; i < 1000; ++i) CHECK(obs_sample(s, theta, cfg, rng) == 0);
}

TEST_CASE("effective reproduction number") {
  ParamVector theta{0.5, 1.0 / 7.0, 0, 0, 0.3};
  LatentState s;
  s.S = 500000;
  s.log_beta = std::log(0.3);
  CHECK(effective_reproduction(s, theta, 500000) == doctest::Approx(2.1));
  s.S = 0;
  CHECK(effective_reproduction(s, theta, 500000) == doctest::Approx(0.0));
  s.S = 500000;
  s.log_beta = std::log(theta.gamma);
  CHECK(effective_reproduction(s, theta, 500000) == doctest::Approx(1.0));
  theta.gamma = 0;
  CHECK_THROWS_AS(effective_reproduction(s, theta, 500000), std::domain_error);
}

TEST_CASE("simulator follows the schedule and is deterministic") {
  const ExamplePreset ex = example1();
  RngStream rng1(RngKey{42, 0});
  RngStream rng2(RngKey{42, 0});
  const auto a = simulate_epidemic(ex.model, ex.true_theta, ex.beta_schedule, 30,
                                   ex.sim_initial, rng1);
  const auto b = simulate_epidemic(ex.model, ex.true_theta, ex.beta_schedule, 30,
                                   ex.sim_initial, rng2);
  REQUIRE(a.path.size() == 31);
  REQUIRE(a.observations.size() == 30);
  for (int t = 0; t <= 30; ++t) {
    CHECK(a.path[t].S == b.path[t].S);
    CHECK(a.path[t].log_beta == b.path[t].log_beta);
    CHECK(std::exp(a.path[t].log_beta) == doctest::Approx(ex.beta_schedule(t)));
  }
  CHECK(a.observations == b.observations);
}

TEST_CASE("recoveries are monotone along simulated paths") {
  const ExamplePreset ex = example2();
  RngStream rng(RngKey{43, 0});
  const auto sim = simulate_epidemic(ex.model, ex.true_theta, ex.beta_schedule, 100,
                                     ex.sim_initial, rng);
  for (std::size_t t = 1; t < sim.path.size(); ++t)
    CHECK(sim.path[t].R >= sim.path[t - 1].R);
}

TEST_CASE("zero schedule is rejected, tiny positive schedule freezes the epidemic") {
  const ExamplePreset ex = example1();
  RngStream rng(RngKey{44, 0});
  CHECK_THROWS_AS(simulate_epidemic(ex.model, ex.true_theta, [](double) { return 0.0; },
                                    10, ex.sim_initial, rng),
                  std::domain_error);
  const auto sim = simulate_epidemic(ex.model, ex.true_theta,
                                     [](double) { return 1e-300; }, 10, ex.sim_initial,
                                     rng);
  for (auto y : sim.observations) CHECK(y == 0);
  CHECK(sim.path.back().S == doctest::Approx(ex.sim_initial.S));
}
