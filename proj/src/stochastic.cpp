#include "epismc/stochastic.hpp"

#include <algorithm>
#include <cmath>

namespace epismc {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178032973640562;

// Acklam's rational approximation with one Halley refinement through the
// erfc-based CDF; accurate to ~1e-15 over (0,1).
double acklam_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - plow) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0 && p < 1)) {
    if (p == 0) return -std::numeric_limits<double>::infinity();
    if (p == 1) return std::numeric_limits<double>::infinity();
    throw std::domain_error("normal_quantile: p outside [0,1]");
  }
  return acklam_quantile(p);
}

PriorMarginal PriorMarginal::normal(double mean, double sd) {
  if (!(sd > 0)) throw std::domain_error("normal prior: sd must be > 0");
  PriorMarginal m;
  m.kind = Kind::Normal;
  m.a = mean;
  m.b = sd;
  return m;
}

PriorMarginal PriorMarginal::trunc_normal(double mean, double sd, double lo, double hi) {
  if (!(sd > 0)) throw std::domain_error("truncated normal prior: sd must be > 0");
  if (!(lo < hi)) throw std::domain_error("truncated normal prior: lower must be < upper");
  PriorMarginal m;
  m.kind = Kind::TruncNormal;
  m.a = mean;
  m.b = sd;
  m.lower = lo;
  m.upper = hi;
  return m;
}

PriorMarginal PriorMarginal::uniform(double lo, double hi) {
  if (!(lo < hi)) throw std::domain_error("uniform prior: lower must be < upper");
  PriorMarginal m;
  m.kind = Kind::Uniform;
  m.a = lo;
  m.b = hi;
  m.lower = lo;
  m.upper = hi;
  return m;
}

PriorMarginal PriorMarginal::fixed(double value) {
  PriorMarginal m;
  m.kind = Kind::Fixed;
  m.a = value;
  return m;
}

double PriorMarginal::sample(RngStream& rng) const {
  switch (kind) {
    case Kind::Fixed:
      return a;
    case Kind::Uniform:
      return a + (b - a) * rng.uniform();
    case Kind::Normal:
      return a + b * rng.normal();
    case Kind::TruncNormal: {
      const double zlo = (lower - a) / b;
      const double zhi = (upper - a) / b;
      const double mass = normal_cdf(zhi) - normal_cdf(zlo);
      if (mass >= 0.01) {
        // rejection from the untruncated normal
        for (;;) {
          const double x = a + b * rng.normal();
          if (x >= lower && x <= upper) return x;
        }
      }
      // inverse CDF on the truncated interval for extreme truncations
      const double plo = normal_cdf(zlo);
      const double u = plo + mass * rng.uniform();
      const double z = normal_quantile(std::min(std::max(u, 1e-300), 1.0 - 1e-16));
      return std::min(std::max(a + b * z, lower), upper);
    }
  }
  return a;
}

double PriorMarginal::log_density(double x) const {
  switch (kind) {
    case Kind::Fixed:
      return 0.0;
    case Kind::Uniform:
      if (x < a || x > b) return kLogZero;
      return -std::log(b - a);
    case Kind::Normal: {
      const double z = (x - a) / b;
      return -0.5 * z * z - std::log(b) - kHalfLog2Pi;
    }
    case Kind::TruncNormal: {
      if (x < lower || x > upper) return kLogZero;
      const double zlo = (lower - a) / b;
      const double zhi = (upper - a) / b;
      const double mass = normal_cdf(zhi) - normal_cdf(zlo);
      const double z = (x - a) / b;
      return -0.5 * z * z - std::log(b) - kHalfLog2Pi - std::log(mass);
    }
  }
  return kLogZero;
}

double PriorMarginal::support_lower() const noexcept {
  switch (kind) {
    case Kind::Uniform:
      return a;
    case Kind::Fixed:
      return a;
    default:
      return lower;
  }
}

double PriorMarginal::support_upper() const noexcept {
  switch (kind) {
    case Kind::Uniform:
      return b;
    case Kind::Fixed:
      return a;
    default:
      return upper;
  }
}

std::string PriorMarginal::describe() const {
  char buf[128];
  switch (kind) {
    case Kind::Fixed:
      std::snprintf(buf, sizeof buf, "fixed(%g)", a);
      break;
    case Kind::Uniform:
      std::snprintf(buf, sizeof buf, "uniform(%g,%g)", a, b);
      break;
    case Kind::Normal:
      std::snprintf(buf, sizeof buf, "norm(%g,%g)", a, b);
      break;
    case Kind::TruncNormal:
      std::snprintf(buf, sizeof buf, "tnorm(%g,%g,%g,%g)", a, b, lower, upper);
      break;
  }
  return buf;
}

std::vector<int> PriorSpec::free_indices() const {
  std::vector<int> out;
  for (int k = 0; k < ParamVector::n_params; ++k)
    if (marginals[k].is_free()) out.push_back(k);
  return out;
}

ParamVector PriorSpec::sample(RngStream& rng) const {
  ParamVector theta;
  for (int k = 0; k < ParamVector::n_params; ++k) theta.set(k, marginals[k].sample(rng));
  return theta;
}

double PriorSpec::log_density(const ParamVector& theta) const {
  double acc = 0;
  for (int k = 0; k < ParamVector::n_params; ++k) {
    if (!marginals[k].is_free()) continue;
    const double lp = marginals[k].log_density(theta.get(k));
    if (lp == kLogZero) return kLogZero;
    acc += lp;
  }
  return acc;
}

double log_sum_exp(const std::vector<double>& log_values) {
  double mx = kLogZero;
  for (double v : log_values) mx = std::max(mx, v);
  if (mx == kLogZero) return kLogZero;
  double acc = 0;
  for (double v : log_values) acc += std::exp(v - mx);
  return mx + std::log(acc);
}

WeightVector normalize_log_weights(const std::vector<double>& log_weights) {
  if (log_weights.empty()) throw degenerate_weights_error("empty weight vector");
  const double lse = log_sum_exp(log_weights);
  if (lse == kLogZero)
    throw degenerate_weights_error("all weights are zero after normalization");
  WeightVector out;
  out.w.resize(log_weights.size());
  double total = 0;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    out.w[i] = std::exp(log_weights[i] - lse);
    total += out.w[i];
  }
  for (double& wi : out.w) wi /= total;
  return out;
}

double ess(const WeightVector& weights) {
  double s2 = 0;
  for (double wi : weights.w) s2 += wi * wi;
  if (s2 <= 0) throw degenerate_weights_error("ess: zero weight vector");
  return 1.0 / s2;
}

MeanSd weighted_mean_sd(const std::vector<double>& values,
                        const std::vector<double>& weights) {
  double wsum = 0, m = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    wsum += weights[i];
    m += weights[i] * values[i];
  }
  if (!(wsum > 0)) throw degenerate_weights_error("weighted_mean_sd: zero weights");
  m /= wsum;
  double v = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - m;
    v += weights[i] * d * d;
  }
  return {m, std::sqrt(v / wsum)};
}

double weighted_quantile(std::vector<double> values, std::vector<double> weights,
                         double q) {
  if (values.empty() || values.size() != weights.size())
    throw std::domain_error("weighted_quantile: bad inputs");
  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  double wsum = 0;
  for (double w : weights) wsum += w;
  if (!(wsum > 0)) throw degenerate_weights_error("weighted_quantile: zero weights");

  double cum = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    cum += weights[order[r]] / wsum;
    if (cum >= q - 1e-12) {
      if (std::abs(cum - q) <= 1e-12 && r + 1 < order.size())
        return 0.5 * (values[order[r]] + values[order[r + 1]]);
      return values[order[r]];
    }
  }
  return values[order.back()];
}

double quantile_sorted(const std::vector<double>& sorted_values, double q) {
  if (sorted_values.empty()) throw std::domain_error("quantile_sorted: empty sample");
  const double h = (static_cast<double>(sorted_values.size()) - 1) * q;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted_values.size()) return sorted_values.back();
  const double frac = h - static_cast<double>(lo);
  return sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo]);
}

std::vector<std::int32_t> stratified_resample(const WeightVector& weights, RngStream& rng) {
  const std::size_t n = weights.size();
  double total = 0;
  for (double wi : weights.w) total += wi;
  if (!(total > 0)) throw degenerate_weights_error("stratified_resample: zero weights");

  std::vector<std::int32_t> idx(n);
  std::size_t i = 0;
  double cum = weights.w[0] / total;
  for (std::size_t k = 0; k < n; ++k) {
    const double u = (static_cast<double>(k) + rng.uniform()) / static_cast<double>(n);
    while (u > cum && i + 1 < n) {
      ++i;
      cum += weights.w[i] / total;
    }
    idx[k] = static_cast<std::int32_t>(i);
  }
  return idx;
}

}  // namespace epismc
