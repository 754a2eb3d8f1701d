#pragma once

#include <optional>
#include <vector>

namespace epismc {

// Dense symmetric matrix stored row-major; only small dimensions (state,
// parameter and observation blocks) appear in this codebase.
struct SymMatrix {
  int n = 0;
  std::vector<double> a;  // n*n, row-major

  SymMatrix() = default;
  explicit SymMatrix(int dim) : n(dim), a(static_cast<std::size_t>(dim) * dim, 0.0) {}
  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
  double at(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }
  double trace() const {
    double t = 0;
    for (int i = 0; i < n; ++i) t += at(i, i);
    return t;
  }
};

// Lower-triangular Cholesky factor, or nullopt when a pivot falls at or
// below `pivot_tol` (the matrix is treated as not positive definite).
std::optional<SymMatrix> cholesky(const SymMatrix& m, double pivot_tol = 1e-12);

// log determinant of L L^T given the factor L.
double log_det_from_cholesky(const SymMatrix& chol_l);

// Solves L L^T x = b in place given the factor L.
void cholesky_solve(const SymMatrix& chol_l, std::vector<double>& b);

// y = L z for standard-normal z; used to draw from N(mean, L L^T).
std::vector<double> cholesky_lower_times(const SymMatrix& chol_l,
                                         const std::vector<double>& z);

}  // namespace epismc
