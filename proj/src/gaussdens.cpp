#include "epismc/gaussdens.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace epismc {

namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kLog2 = 0.69314718055994530941723212145818;
constexpr double kLogPi = 1.1447298858494001741434273513531;

void check_symmetric(const SymMatrix& cov) {
  for (int i = 0; i < cov.n; ++i)
    for (int j = i + 1; j < cov.n; ++j)
      if (std::abs(cov.at(i, j) - cov.at(j, i)) > 1e-12 * (1 + std::abs(cov.at(i, j))))
        throw std::domain_error("covariance matrix is not symmetric");
}

}  // namespace

double log_c(int d, double v) {
  if (!(v > d - 1)) throw std::domain_error("log_c: requires v > d - 1");
  double lg = 0;
  for (int i = 1; i <= d; ++i) lg += std::lgamma(0.5 * (v - i + 1));
  return -0.5 * d * v * kLog2 - 0.25 * d * (d - 1) * kLogPi - lg;
}

double unbiased_gaussian_logpdf(const std::vector<double>& y, const MomentPair& moments,
                                int n_ensemble) {
  const int d = moments.dim();
  if (static_cast<int>(y.size()) != d)
    throw std::domain_error("unbiased_gaussian_logpdf: dimension mismatch");
  if (n_ensemble <= d + 3)
    throw std::domain_error("unbiased_gaussian_logpdf: requires ensemble size > d + 3");
  check_symmetric(moments.cov);

  const double n = n_ensemble;
  if (d == 1) {
    // scalar fast path, same pivot tolerance as the matrix factorization
    const double m = (n - 1) * moments.cov.at(0, 0);
    if (!(m > 1e-12)) return kLogZero;
    const double r = y[0] - moments.mean[0];
    const double shrink = 1.0 - 1.0 / n;
    const double a = m - r * r / shrink;
    if (!(a > 1e-12)) return kLogZero;
    return -0.5 * kLog2Pi + log_c(1, n - 2) - log_c(1, n - 1) - 0.5 * std::log(shrink) -
           0.5 * (n - 3) * std::log(m) + 0.5 * (n - 4) * std::log(a);
  }
  SymMatrix m(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m.at(i, j) = (n - 1) * moments.cov.at(i, j);

  const auto chol_m = cholesky(m);
  if (!chol_m) return kLogZero;
  const double log_det_m = log_det_from_cholesky(*chol_m);

  // scatter matrix after removing the evaluation point's contribution
  const double shrink = 1.0 - 1.0 / n;
  SymMatrix a = m;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      a.at(i, j) -= (y[i] - moments.mean[i]) * (y[j] - moments.mean[j]) / shrink;

  const auto chol_a = cholesky(a);
  if (!chol_a) return kLogZero;
  const double log_det_a = log_det_from_cholesky(*chol_a);

  return -0.5 * d * kLog2Pi + log_c(d, n - 2) - log_c(d, n - 1) -
         0.5 * d * std::log(shrink) - 0.5 * (n - d - 2) * log_det_m +
         0.5 * (n - d - 3) * log_det_a;
}

double standard_gaussian_logpdf(const std::vector<double>& y, const MomentPair& moments) {
  const int d = moments.dim();
  if (static_cast<int>(y.size()) != d)
    throw std::domain_error("standard_gaussian_logpdf: dimension mismatch");
  check_symmetric(moments.cov);
  const auto chol = cholesky(moments.cov, 0.0);
  if (!chol) throw std::domain_error("standard_gaussian_logpdf: covariance not positive definite");

  std::vector<double> r(y.size());
  for (int i = 0; i < d; ++i) r[i] = y[i] - moments.mean[i];
  std::vector<double> solved = r;
  cholesky_solve(*chol, solved);
  double quad = 0;
  for (int i = 0; i < d; ++i) quad += r[i] * solved[i];
  return -0.5 * (d * kLog2Pi + log_det_from_cholesky(*chol) + quad);
}

}  // namespace epismc
