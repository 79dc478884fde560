#pragma once

#include "wnsf/dataset.hpp"
#include "wnsf/linalg.hpp"

#include <vector>

namespace wnsf {

/// High-order ARX estimate of the first n predictor Markov parameters.
struct MarkovEstimate {
  Matrix g_hat;            ///< [g_1 ... g_n], n_y x n * n_z
  Matrix gram;             ///< R_n = (1/N) sum z_n(k) z_n(k)^T
  Matrix gram_chol;        ///< lower Cholesky factor of R_n + ridge I
  double ridge = 0.0;
  Index effective_samples = 0;
  double sigma_e2_hat = 0.0;
  int order = 0;
  int n_u = 0;
  int n_y = 0;

  int n_z() const { return n_u + n_y; }
  std::vector<Matrix> markov() const;

  /// R_n^{-1} X via the stored factor.
  Matrix gram_solve(const Matrix& x) const;
  /// L^{-1} X, the whitening half of R_n^{-1}.
  Matrix gram_whiten(const Matrix& x) const;

  /// Wraps exact Markov parameters. An empty gram means the identity.
  static MarkovEstimate from_exact(const std::vector<Matrix>& g, int n_u, Index samples = 1,
                                   const Matrix& gram = Matrix(), double sigma_e2 = 0.0);
};

struct Regressors {
  Matrix targets;     ///< N x n_y
  Matrix regressors;  ///< N x n * n_z, row k = [z_{k-1}^T ... z_{k-n}^T]
};

/// Number of usable rows for order n.
Index hoarx_rows(Index samples, int n);

Regressors build_regressors(const Dataset& data, int n);

/// Least squares with a Cholesky-factored Gram. The Gram is accumulated with a
/// shift recursion instead of materializing the regressor matrix.
MarkovEstimate estimate_hoarx(const Dataset& data, int n, double ridge = 0.0);

/// Default tiny ridge: 1e-10 trace(R_n) / dim.
double default_ridge(const Matrix& gram);

}  // namespace wnsf
