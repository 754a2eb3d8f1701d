#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "epismc/model.hpp"
#include "epismc/rng.hpp"

namespace epismc {

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

struct degenerate_weights_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double normal_cdf(double x);
double normal_quantile(double p);  // inverse standard normal CDF

// One prior marginal. `Fixed` pins a parameter at `a` and contributes
// nothing to the density.
struct PriorMarginal {
  enum class Kind { Normal, TruncNormal, Uniform, Fixed } kind = Kind::Fixed;
  double a = 0;  // mean (Normal/TruncNormal), lower (Uniform), value (Fixed)
  double b = 0;  // sd (Normal/TruncNormal), upper (Uniform)
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  static PriorMarginal normal(double mean, double sd);
  static PriorMarginal trunc_normal(double mean, double sd, double lo, double hi);
  static PriorMarginal uniform(double lo, double hi);
  static PriorMarginal fixed(double value);

  bool is_free() const noexcept { return kind != Kind::Fixed; }
  double sample(RngStream& rng) const;
  double log_density(double x) const;
  // support bounds (used to clamp jittered parameters back in range)
  double support_lower() const noexcept;
  double support_upper() const noexcept;
  std::string describe() const;
};

// Independent marginals over the entries of ParamVector, indexed as in
// ParamVector::get. Marginals of Fixed kind carry the pinned value.
struct PriorSpec {
  PriorMarginal marginals[ParamVector::n_params];

  std::vector<int> free_indices() const;
  ParamVector sample(RngStream& rng) const;
  double log_density(const ParamVector& theta) const;
};

// Normalized weights, kept alongside their log-space representation.
struct WeightVector {
  std::vector<double> w;  // sums to 1 within 1e-12

  std::size_t size() const noexcept { return w.size(); }
  double operator[](std::size_t i) const noexcept { return w[i]; }
};

// log-sum-exp normalization; throws degenerate_weights_error when every
// entry is log-zero.
WeightVector normalize_log_weights(const std::vector<double>& log_weights);

// 1 / sum w_i^2, in [1, N] for a valid weight vector.
double ess(const WeightVector& weights);

// Stratified resampling: ancestor index i is drawn with one uniform per
// stratum ((k-1)/N, k/N]. Equal weights map every slot to itself.
std::vector<std::int32_t> stratified_resample(const WeightVector& weights, RngStream& rng);

// log of the total normalizer sum(exp(lw)) computed stably; kLogZero when
// all entries are log-zero.
double log_sum_exp(const std::vector<double>& log_values);

struct MeanSd {
  double mean = 0;
  double sd = 0;
};

// Divide-by-sum weighted moments.
MeanSd weighted_mean_sd(const std::vector<double>& values,
                        const std::vector<double>& weights);

// Weighted quantile through the inverse empirical CDF: the smallest value
// whose cumulative weight reaches q. When q lands exactly on a boundary
// between two atoms the two adjacent values are averaged, which reproduces
// the usual midpoint convention for equal weights.
double weighted_quantile(std::vector<double> values, std::vector<double> weights,
                         double q);

// Quantile of an already sorted equal-weight sample, linearly interpolated
// between order statistics.
double quantile_sorted(const std::vector<double>& sorted_values, double q);

}  // namespace epismc
