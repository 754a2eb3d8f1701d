#pragma once

#include <vector>

#include "epismc/linalg.hpp"

namespace epismc {

// Sample mean and covariance of a predicted observation, the arguments of
// the Gaussian predictive density. cov includes the observation-noise term.
struct MomentPair {
  std::vector<double> mean;
  SymMatrix cov;

  int dim() const noexcept { return static_cast<int>(mean.size()); }
};

// log c(d, v) = log [ 2^{-dv/2} pi^{-d(d-1)/4} / prod_i Gamma((v-i+1)/2) ],
// the normalizing constant of the Wishart-type density; requires v > d-1.
double log_c(int d, double v);

// Finite-sample-corrected Gaussian log-density: evaluated at moments
// estimated from an ensemble of size n_ensemble, its expectation over
// ensembles equals the exact N(y; mu, Sigma) density. Requires
// n_ensemble > d + 3. Returns -inf when the corrected scatter matrix is
// not positive definite.
double unbiased_gaussian_logpdf(const std::vector<double>& y, const MomentPair& moments,
                                int n_ensemble);

// Plug-in multivariate normal log-density at the given moments.
double standard_gaussian_logpdf(const std::vector<double>& y, const MomentPair& moments);

}  // namespace epismc
