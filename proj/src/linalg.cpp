#include "epismc/linalg.hpp"

#include <cmath>

namespace epismc {

std::optional<SymMatrix> cholesky(const SymMatrix& m, double pivot_tol) {
  const int n = m.n;
  SymMatrix l(n);
  for (int j = 0; j < n; ++j) {
    double d = m.at(j, j);
    for (int k = 0; k < j; ++k) d -= l.at(j, k) * l.at(j, k);
    if (!(d > pivot_tol)) return std::nullopt;
    const double root = std::sqrt(d);
    l.at(j, j) = root;
    for (int i = j + 1; i < n; ++i) {
      double s = m.at(i, j);
      for (int k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
      l.at(i, j) = s / root;
    }
  }
  return l;
}

double log_det_from_cholesky(const SymMatrix& chol_l) {
  double acc = 0;
  for (int i = 0; i < chol_l.n; ++i) acc += std::log(chol_l.at(i, i));
  return 2.0 * acc;
}

void cholesky_solve(const SymMatrix& chol_l, std::vector<double>& b) {
  const int n = chol_l.n;
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= chol_l.at(i, k) * b[k];
    b[i] = s / chol_l.at(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= chol_l.at(k, i) * b[k];
    b[i] = s / chol_l.at(i, i);
  }
}

std::vector<double> cholesky_lower_times(const SymMatrix& chol_l,
                                         const std::vector<double>& z) {
  const int n = chol_l.n;
  std::vector<double> y(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0;
    for (int k = 0; k <= i; ++k) s += chol_l.at(i, k) * z[k];
    y[i] = s;
  }
  return y;
}

}  // namespace epismc
