#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "epismc/stochastic.hpp"

using namespace epismc;

TEST_CASE("uniform prior sampling stays in range with the right mean") {
  const auto m = PriorMarginal::uniform(0.0, 0.5);
  RngStream rng(RngKey{10, 0});
  const int n = 100000;
  double mean = 0;
  for (int i = 0; i < n; ++i) {
    const double x = m.sample(rng);
    REQUIRE(x >= 0.0);
    REQUIRE(x <= 0.5);
    mean += x;
  }
  CHECK(std::abs(mean / n - 0.25) < 0.005);
}

TEST_CASE("truncated normal sampling respects the bound") {
  const auto m = PriorMarginal::trunc_normal(0.6, 0.3, 0.0,
                                             std::numeric_limits<double>::infinity());
  RngStream rng(RngKey{11, 0});
  for (int i = 0; i < 20000; ++i) REQUIRE(m.sample(rng) >= 0.0);
}

TEST_CASE("extreme truncation falls back to inverse-CDF sampling") {
  // mass of [8, 9] under N(0,1) is ~6e-16; rejection would never finish
  const auto m = PriorMarginal::trunc_normal(0.0, 1.0, 8.0, 9.0);
  RngStream rng(RngKey{12, 0});
  for (int i = 0; i < 1000; ++i) {
    const double x = m.sample(rng);
    REQUIRE(x >= 8.0);
    REQUIRE(x <= 9.0);
  }
}

TEST_CASE("nearly degenerate sd concentrates at the mean") {
  const auto m = PriorMarginal::normal(0.3, 1e-300);
  RngStream rng(RngKey{13, 0});
  for (int i = 0; i < 100; ++i) CHECK(m.sample(rng) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("prior log densities") {
  const auto u = PriorMarginal::uniform(0.0, 0.5);
  CHECK(u.log_density(0.25) == doctest::Approx(std::log(2.0)));
  CHECK(u.log_density(0.7) == kLogZero);

  // half-normal: twice the standard normal density on the positive side
  const auto h = PriorMarginal::trunc_normal(0.0, 1.0, 0.0,
                                             std::numeric_limits<double>::infinity());
  const double phi = std::exp(-0.5 * 0.25) / std::sqrt(2 * M_PI);
  CHECK(h.log_density(0.5) == doctest::Approx(std::log(2 * phi)).epsilon(1e-10));
}

TEST_CASE("prior spec sums free marginal densities and flags support") {
  PriorSpec spec;
  spec.marginals[0] = PriorMarginal::uniform(0.0, 1.0);
  spec.marginals[1] = PriorMarginal::uniform(0.0, 2.0);
  ParamVector theta;
  theta.alpha = 0.5;
  theta.gamma = 1.0;
  CHECK(spec.log_density(theta) == doctest::Approx(std::log(1.0) + std::log(0.5)));
  theta.gamma = 3.0;
  CHECK(spec.log_density(theta) == kLogZero);
  CHECK(spec.free_indices() == std::vector<int>{0, 1});
}

TEST_CASE("normalize_log_weights") {
  const auto w = normalize_log_weights({0.0, 0.0});
  CHECK(w[0] == doctest::Approx(0.5));

  const auto v = normalize_log_weights({-1000.0, -1001.0});
  CHECK(v[0] == doctest::Approx(1 / (1 + std::exp(-1.0))).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(std::exp(-1.0) / (1 + std::exp(-1.0))).epsilon(1e-12));

  CHECK(normalize_log_weights({-3.0})[0] == doctest::Approx(1.0));

  CHECK_THROWS_AS(normalize_log_weights({kLogZero, kLogZero}), degenerate_weights_error);
}

TEST_CASE("log weight normalization is shift invariant") {
  RngStream rng(RngKey{14, 0});
  std::vector<double> lw(50);
  for (auto& x : lw) x = -50 + 20 * rng.normal();
  const auto base = normalize_log_weights(lw);
  for (auto& x : lw) x += 1234.5;
  const auto shifted = normalize_log_weights(lw);
  double sum = 0;
  for (std::size_t i = 0; i < lw.size(); ++i) {
    CHECK(std::abs(base[i] - shifted[i]) <= 1e-12);
    sum += shifted[i];
  }
  CHECK(std::abs(sum - 1.0) <= 1e-12);
}

TEST_CASE("effective sample size") {
  WeightVector equal;
  equal.w.assign(1000, 0.001);
  CHECK(ess(equal) == doctest::Approx(1000.0));

  WeightVector point;
  point.w = {1.0, 0.0, 0.0};
  CHECK(ess(point) == doctest::Approx(1.0));

  WeightVector two;
  two.w = {0.75, 0.25};
  CHECK(ess(two) == doctest::Approx(1.6));
}

TEST_CASE("stratified resampling maps equal weights to the identity") {
  WeightVector w;
  w.w.assign(4, 0.25);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RngStream rng(RngKey{seed, 99});
    CHECK(stratified_resample(w, rng) == std::vector<std::int32_t>{0, 1, 2, 3});
  }
}

TEST_CASE("stratified resampling of a point mass") {
  WeightVector w;
  w.w = {1.0, 0.0, 0.0};
  RngStream rng(RngKey{15, 0});
  CHECK(stratified_resample(w, rng) == std::vector<std::int32_t>{0, 0, 0});
}

TEST_CASE("stratified resampling selects each half exactly once") {
  WeightVector w;
  w.w = {0.5, 0.5};
  for (std::uint64_t trial = 0; trial < 100000; ++trial) {
    RngStream rng(RngKey{trial, 5});
    const auto idx = stratified_resample(w, rng);
    CHECK(idx[0] == 0);
    CHECK(idx[1] == 1);
  }
}

TEST_CASE("stratified copy counts stay within the stratification bounds") {
  // an atom of mass N w_i spans at least floor(N w_i) - 1 full strata and
  // at most ceil(N w_i) + 1 partial ones; checked over random weights
  RngStream wrng(RngKey{16, 0});
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 2 + static_cast<int>(wrng.uniform() * 7);  // 2..8
    std::vector<double> raw(n);
    double total = 0;
    for (auto& x : raw) {
      x = wrng.uniform() + 1e-3;
      total += x;
    }
    WeightVector w;
    for (double x : raw) w.w.push_back(x / total);
    RngStream rng(RngKey{17, static_cast<std::uint64_t>(rep)});
    const auto idx = stratified_resample(w, rng);
    std::vector<int> count(n, 0);
    for (auto i : idx) count[i]++;
    for (int i = 0; i < n; ++i) {
      const double expect = n * w.w[i];
      CHECK(count[i] >= std::max(0, static_cast<int>(std::floor(expect)) - 1));
      CHECK(count[i] <= static_cast<int>(std::ceil(expect)) + 1);
    }
  }
}

TEST_CASE("resampling frequencies are unbiased") {
  WeightVector w;
  w.w = {0.1, 0.25, 0.05, 0.6};
  const int trials = 100000;
  std::vector<double> freq(4, 0);
  for (int trial = 0; trial < trials; ++trial) {
    RngStream rng(RngKey{18, static_cast<std::uint64_t>(trial)});
    for (auto i : stratified_resample(w, rng)) freq[i] += 1.0;
  }
  for (int i = 0; i < 4; ++i) {
    const double phat = freq[i] / (4.0 * trials);
    const double se = std::sqrt(w.w[i] * (1 - w.w[i]) / (4.0 * trials));
    CHECK(std::abs(phat - w.w[i]) < 3 * se + 1e-12);
  }
}

TEST_CASE("all-zero weights are rejected") {
  WeightVector w;
  w.w = {0.0, 0.0};
  RngStream rng(RngKey{19, 0});
  CHECK_THROWS_AS(stratified_resample(w, rng), degenerate_weights_error);
}

TEST_CASE("weighted summaries") {
  const auto ms = weighted_mean_sd({1, 2, 3}, {1, 1, 1});
  CHECK(ms.mean == doctest::Approx(2.0));

  const auto point = weighted_mean_sd({5, 99}, {1, 0});
  CHECK(point.mean == doctest::Approx(5.0));
  CHECK(point.sd == doctest::Approx(0.0));

  // inverse-CDF convention: the atom holding the target mass wins
  CHECK(weighted_quantile({0, 1}, {0.25, 0.75}, 0.5) == doctest::Approx(1.0));
  // equal weights hit the boundary exactly and average the neighbors
  CHECK(weighted_quantile({1, 2, 3, 4}, {1, 1, 1, 1}, 0.5) == doctest::Approx(2.5));
  CHECK(weighted_quantile({3, 1, 2}, {1, 1, 1}, 0.5) == doctest::Approx(2.0));
}

TEST_CASE("sorted quantile interpolates linearly") {
  const std::vector<double> v{0, 1, 2, 3, 4};
  CHECK(quantile_sorted(v, 0.5) == doctest::Approx(2.0));
  CHECK(quantile_sorted(v, 0.625) == doctest::Approx(2.5));
  CHECK(quantile_sorted(v, 0.0) == doctest::Approx(0.0));
  CHECK(quantile_sorted(v, 1.0) == doctest::Approx(4.0));
}

TEST_CASE("normal quantile inverts the cdf") {
  for (double p : {0.001, 0.025, 0.3, 0.5, 0.9, 0.999}) {
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
  }
}
