#include "epismc/smc2.hpp"

#include <algorithm>
#include <cmath>

namespace epismc {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

ParamVector ProposalSpec::sample(const ParamVector& fixed_template, RngStream& rng) const {
  const int d = static_cast<int>(free.size());
  std::vector<double> z(d);
  for (int i = 0; i < d; ++i) z[i] = rng.normal();
  const std::vector<double> shift = cholesky_lower_times(chol, z);
  ParamVector theta = fixed_template;
  for (int i = 0; i < d; ++i) theta.set(free[i], mean[i] + shift[i]);
  return theta;
}

double ProposalSpec::log_density(const ParamVector& theta) const {
  const int d = static_cast<int>(free.size());
  std::vector<double> r(d);
  for (int i = 0; i < d; ++i) r[i] = theta.get(free[i]) - mean[i];
  std::vector<double> solved = r;
  cholesky_solve(chol, solved);
  double quad = 0;
  for (int i = 0; i < d; ++i) quad += r[i] * solved[i];
  return -0.5 * (d * kLog2Pi + log_det_from_cholesky(chol) + quad);
}

ProposalSpec build_proposal(const std::vector<ParamVector>& thetas,
                            const std::vector<double>& weights,
                            const std::vector<int>& free, double scale) {
  if (thetas.size() < 2) throw proposal_error("proposal: need at least two particles");
  const int d = static_cast<int>(free.size());

  ProposalSpec spec;
  spec.free = free;
  spec.mean.assign(d, 0.0);
  double wsum = 0;
  for (std::size_t m = 0; m < thetas.size(); ++m) {
    wsum += weights[m];
    for (int i = 0; i < d; ++i) spec.mean[i] += weights[m] * thetas[m].get(free[i]);
  }
  if (!(wsum > 0)) throw proposal_error("proposal: zero weights");
  for (double& v : spec.mean) v /= wsum;

  spec.cov = SymMatrix(d);
  for (std::size_t m = 0; m < thetas.size(); ++m) {
    for (int i = 0; i < d; ++i) {
      const double di = thetas[m].get(free[i]) - spec.mean[i];
      for (int j = i; j < d; ++j) {
        const double dj = thetas[m].get(free[j]) - spec.mean[j];
        spec.cov.at(i, j) += weights[m] * di * dj;
      }
    }
  }
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      spec.cov.at(i, j) = scale * spec.cov.at(i, j) / wsum;
      spec.cov.at(j, i) = spec.cov.at(i, j);
    }

  const double jitter = 1e-10 * spec.cov.trace();
  for (int i = 0; i < d; ++i) spec.cov.at(i, i) += jitter;

  auto chol = cholesky(spec.cov, 0.0);
  if (!chol)
    throw proposal_error(
        "proposal: particle covariance is singular; increase the number of "
        "parameter particles");
  spec.chol = std::move(*chol);
  return spec;
}

std::vector<ParamSummary> summarize_params(const std::vector<ParamVector>& thetas,
                                           const std::vector<double>& weights,
                                           const std::vector<int>& free) {
  std::vector<ParamSummary> out;
  out.reserve(free.size());
  std::vector<double> values(thetas.size());
  for (int k : free) {
    for (std::size_t m = 0; m < thetas.size(); ++m) values[m] = thetas[m].get(k);
    const MeanSd ms = weighted_mean_sd(values, weights);
    ParamSummary s;
    s.mean = ms.mean;
    s.sd = ms.sd;
    s.q025 = weighted_quantile(values, weights, 0.025);
    s.q25 = weighted_quantile(values, weights, 0.25);
    s.q50 = weighted_quantile(values, weights, 0.50);
    s.q75 = weighted_quantile(values, weights, 0.75);
    s.q975 = weighted_quantile(values, weights, 0.975);
    out.push_back(s);
  }
  return out;
}

}  // namespace epismc
