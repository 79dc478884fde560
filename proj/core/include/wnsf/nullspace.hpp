#pragma once

#include "wnsf/hoarx.hpp"
#include "wnsf/linalg.hpp"
#include "wnsf/model.hpp"

#include <string>
#include <vector>

namespace wnsf {

/// (n_x + 1) block rows of Markov parameters, p = n - n_x block columns.
struct HankelStack {
  Matrix full;
  int p = 0;
  int n = 0;
  CanonicalStructure structure;
  std::vector<int> plus_rows;   ///< basis rows, state order
  std::vector<int> minus_rows;  ///< one block row below each basis row (n_y = 1: the last row)

  Matrix plus() const;
  Matrix minus() const;
  /// Right-hand side of equation eq: a_eq * H^+ = target(eq).
  RowVector target(int eq) const;
};

HankelStack build_hankel(const std::vector<Matrix>& markov, const CanonicalStructure& structure);
HankelStack build_hankel(const MarkovEstimate& markov, const CanonicalStructure& structure);

struct WeightingMatrix {
  Matrix lambda;
  Matrix chol;  ///< lower factor
  std::string source;
  bool regularized = false;
};

/// Singular values of H^+ (largest over smallest).
double plus_condition(const HankelStack& hankel);

std::vector<RowVector> ols_a(const HankelStack& hankel);

/// Weights over all Hankel rows that turn equation eq into w * H.
RowVector row_weights(const CanonicalStructure& structure, int eq, const RowVector& coeffs);

/// Block-Toeplitz map with w * Hankel(dg) == vec_row(dg) * K(w).
Matrix build_kn(const RowVector& weights, int n, int p, int n_y, int n_z);

/// One map per equation; a single entry for n_y = 1.
std::vector<Matrix> build_kn_a(const std::vector<RowVector>& a_rows, int n, int p,
                               const CanonicalStructure& structure);

/// Lambda = sum_j K_j^T R_n^{-1} K_j over output blocks. Regularized with a tiny
/// ridge if the factorization fails.
WeightingMatrix build_weighting(const Matrix& kn, const MarkovEstimate& markov, const std::string& source,
                                std::vector<std::string>* warnings = nullptr);

WeightingMatrix identity_weighting(Index dim);

/// argmin_c (c H^+ - t) Lambda^{-1} (c H^+ - t)^T via the Cholesky factor of Lambda.
RowVector weighted_row_solve(const Matrix& plus, const RowVector& target, const WeightingMatrix& w);

std::vector<RowVector> wls_a(const HankelStack& hankel, const MarkovEstimate& markov,
                             std::vector<RowVector> a_init, int iterations = 2,
                             std::vector<std::string>* warnings = nullptr);

/// Norm of a_eq * H^+ - target over equations.
double nullspace_residual(const HankelStack& hankel, const std::vector<RowVector>& a_rows);

}  // namespace wnsf
