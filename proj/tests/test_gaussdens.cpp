#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "epismc/gaussdens.hpp"
#include "epismc/rng.hpp"
#include "epismc/stochastic.hpp"

using namespace epismc;

namespace {

MomentPair scalar_moments(double mean, double var) {
  MomentPair m;
  m.mean = {mean};
  m.cov = SymMatrix(1);
  m.cov.at(0, 0) = var;
  return m;
}

// sample mean and unbiased variance of an ensemble draw from N(mu, sigma2)
MomentPair draw_scalar_ensemble(double mu, double sigma2, int n, RngStream& rng) {
  double sum = 0, sum2 = 0;
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = mu + std::sqrt(sigma2) * rng.normal();
    sum += xs[i];
  }
  const double mean = sum / n;
  for (int i = 0; i < n; ++i) sum2 += (xs[i] - mean) * (xs[i] - mean);
  return scalar_moments(mean, sum2 / (n - 1));
}

}  // namespace

TEST_CASE("log_c closed forms") {
  // d = 1 reduces to -(v/2) log 2 - lgamma(v/2)
  for (double v : {2.0, 5.0, 97.5}) {
    CHECK(log_c(1, v) ==
          doctest::Approx(-0.5 * v * std::log(2.0) - std::lgamma(0.5 * v)).epsilon(1e-12));
  }
  CHECK(log_c(1, 2) == doctest::Approx(-std::log(2.0)));
  CHECK(log_c(2, 3) == doctest::Approx(-3 * std::log(2.0) - 0.5 * std::log(M_PI) -
                                       std::lgamma(1.5) - std::lgamma(1.0)));
  CHECK_THROWS_AS(log_c(2, 0.5), std::domain_error);
}

TEST_CASE("scalar closed form of the corrected density") {
  // for d=1 the whole expression reduces to elementary functions; compare
  // the generic implementation against an independent scalar transcription
  const int n = 100;
  const double mean = 0.4, var = 2.3, y = 1.1;
  const double m = (n - 1) * var;
  const double a = m - (y - mean) * (y - mean) / (1.0 - 1.0 / n);
  const double expected = -0.5 * std::log(2 * M_PI) + log_c(1, n - 2) - log_c(1, n - 1) -
                          0.5 * std::log(1.0 - 1.0 / n) - 0.5 * (n - 3) * std::log(m) +
                          0.5 * (n - 4) * std::log(a);
  CHECK(unbiased_gaussian_logpdf({y}, scalar_moments(mean, var), n) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("evaluation point outside the ensemble spread yields log-zero") {
  // scatter correction turns negative when (y-mean)^2 >= (1-1/n)(n-1) var
  const int n = 10;
  const double var = 1.0;
  const double edge = std::sqrt((1.0 - 1.0 / n) * (n - 1) * var);
  CHECK(unbiased_gaussian_logpdf({edge + 1e-6}, scalar_moments(0, var), n) == kLogZero);
  CHECK(std::isfinite(unbiased_gaussian_logpdf({edge - 1e-3}, scalar_moments(0, var), n)));
}

TEST_CASE("ensemble size precondition") {
  CHECK_THROWS_AS(unbiased_gaussian_logpdf({0.0}, scalar_moments(0, 1), 4),
                  std::domain_error);
  CHECK(std::isfinite(unbiased_gaussian_logpdf({0.0}, scalar_moments(0, 1), 5)));
}

TEST_CASE("asymmetric covariance is rejected") {
  MomentPair m;
  m.mean = {0, 0};
  m.cov = SymMatrix(2);
  m.cov.at(0, 0) = 1;
  m.cov.at(1, 1) = 1;
  m.cov.at(0, 1) = 0.5;
  m.cov.at(1, 0) = -0.5;
  CHECK_THROWS_AS(unbiased_gaussian_logpdf({0, 0}, m, 20), std::domain_error);
}

TEST_CASE("estimator is unbiased for the scalar density") {
  // average the estimator over ensembles of size 10 from N(0,1) at y=0 and
  // compare with the exact density
  RngStream rng(RngKey{100, 0});
  const int reps = 200000;
  double sum = 0, sum2 = 0;
  for (int r = 0; r < reps; ++r) {
    const MomentPair m = draw_scalar_ensemble(0.0, 1.0, 10, rng);
    const double v = std::exp(unbiased_gaussian_logpdf({0.0}, m, 10));
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / reps;
  const double se = std::sqrt((sum2 / reps - mean * mean) / reps);
  const double exact = 1.0 / std::sqrt(2 * M_PI);
  CHECK(std::abs(mean - exact) < 3 * se);
  // and the plug-in density is visibly biased at this ensemble size
  double plug = 0;
  RngStream rng2(RngKey{101, 0});
  for (int r = 0; r < reps / 10; ++r) {
    const MomentPair m = draw_scalar_ensemble(0.0, 1.0, 10, rng2);
    plug += std::exp(standard_gaussian_logpdf({0.0}, m));
  }
  plug /= reps / 10;
  CHECK(std::abs(plug - exact) > 6 * se);
}

TEST_CASE("estimator converges to the exact log density as the ensemble grows") {
  const double exact = -0.5 * std::log(2 * M_PI) - 0.5 * 0.25;  // N(0.5; 0, 1)
  std::vector<double> med_err;
  for (int n : {10, 100, 10000}) {
    std::vector<double> errs;
    for (int r = 0; r < 100; ++r) {
      RngStream rng(RngKey{200 + n, static_cast<std::uint64_t>(r)});
      const MomentPair m = draw_scalar_ensemble(0.0, 1.0, n, rng);
      errs.push_back(std::abs(unbiased_gaussian_logpdf({0.5}, m, n) - exact));
    }
    std::sort(errs.begin(), errs.end());
    med_err.push_back(errs[errs.size() / 2]);
  }
  CHECK(med_err[1] < med_err[0]);
  CHECK(med_err[2] < med_err[1]);
}

TEST_CASE("log-zero guard never produces NaN") {
  RngStream rng(RngKey{300, 0});
  for (int r = 0; r < 20000; ++r) {
    const MomentPair m = draw_scalar_ensemble(0.0, 0.5, 6, rng);
    const double y = 4 * rng.normal();
    const double v = unbiased_gaussian_logpdf({y}, m, 6);
    CHECK_FALSE(std::isnan(v));
  }
}

TEST_CASE("standard gaussian logpdf closed forms") {
  CHECK(standard_gaussian_logpdf({0.0}, scalar_moments(0, 1)) ==
        doctest::Approx(-0.5 * std::log(2 * M_PI)));
  CHECK(standard_gaussian_logpdf({3.0}, scalar_moments(3.0, 4.0)) ==
        doctest::Approx(-0.5 * std::log(8 * M_PI)));
  // shift invariance
  const double base = standard_gaussian_logpdf({1.3}, scalar_moments(0.2, 2.0));
  CHECK(standard_gaussian_logpdf({1.3 + 5.0}, scalar_moments(5.2, 2.0)) ==
        doctest::Approx(base).epsilon(1e-12));
  CHECK_THROWS_AS(standard_gaussian_logpdf({0.0}, scalar_moments(0, 0)), std::domain_error);
}

TEST_CASE("bivariate density matches the factored product for diagonal covariance") {
  MomentPair m;
  m.mean = {1.0, -2.0};
  m.cov = SymMatrix(2);
  m.cov.at(0, 0) = 2.0;
  m.cov.at(1, 1) = 0.5;
  const double joint = standard_gaussian_logpdf({1.5, -1.0}, m);
  const double split = standard_gaussian_logpdf({1.5}, scalar_moments(1.0, 2.0)) +
                       standard_gaussian_logpdf({-1.0}, scalar_moments(-2.0, 0.5));
  CHECK(joint == doctest::Approx(split).epsilon(1e-12));
}
