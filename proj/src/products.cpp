#include "epismc/products.hpp"

#include <cmath>
#include <stdexcept>

namespace epismc {

const char* quantity_name(int q) {
  switch (q) {
    case 0: return "S";
    case 1: return "E";
    case 2: return "I";
    case 3: return "R";
    case 4: return "Z";
    case 5: return "beta";
    case 6: return "pred_incidence";
    default: return "r_eff";
  }
}

QuantileBands weighted_bands(const std::vector<double>& values,
                             const std::vector<double>& weights) {
  QuantileBands b;
  b.mean = weighted_mean_sd(values, weights).mean;
  b.q025 = weighted_quantile(values, weights, 0.025);
  b.q05 = weighted_quantile(values, weights, 0.05);
  b.q125 = weighted_quantile(values, weights, 0.125);
  b.q25 = weighted_quantile(values, weights, 0.25);
  b.q50 = weighted_quantile(values, weights, 0.50);
  b.q75 = weighted_quantile(values, weights, 0.75);
  b.q875 = weighted_quantile(values, weights, 0.875);
  b.q95 = weighted_quantile(values, weights, 0.95);
  b.q975 = weighted_quantile(values, weights, 0.975);
  return b;
}

Metrics metrics(const std::vector<double>& estimate, const std::vector<double>& truth) {
  if (estimate.size() != truth.size())
    throw std::domain_error("metrics: series lengths differ");
  if (estimate.empty()) throw std::domain_error("metrics: empty series");
  double abs_acc = 0, sq_acc = 0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double e = estimate[i] - truth[i];
    abs_acc += std::abs(e);
    sq_acc += e * e;
  }
  Metrics m;
  m.mae = abs_acc / estimate.size();
  m.rmse = std::sqrt(sq_acc / estimate.size());
  return m;
}

double band_coverage(const std::vector<double>& truth, const std::vector<double>& lo,
                     const std::vector<double>& hi) {
  if (truth.size() != lo.size() || truth.size() != hi.size())
    throw std::domain_error("band_coverage: series lengths differ");
  if (truth.empty()) throw std::domain_error("band_coverage: empty series");
  std::size_t inside = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth[i] >= lo[i] && truth[i] <= hi[i]) ++inside;
  return static_cast<double>(inside) / truth.size();
}

}  // namespace epismc
