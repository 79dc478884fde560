#pragma once

#include "wnsf/hoarx.hpp"
#include "wnsf/linalg.hpp"
#include "wnsf/model.hpp"
#include "wnsf/nullspace.hpp"

#include <functional>
#include <string>
#include <vector>

namespace wnsf {

/// [C; C A_K; ...; C A_K^{n-1}], n block rows of n_y.
struct ObservabilityMatrix {
  Matrix O;
  int n = 0;
  int n_y = 0;
};

ObservabilityMatrix extended_observability(const Matrix& A_K, const Matrix& C, int n);

/// Phi_n with eta * Phi_n = vec_row([g_1 ... g_n]).
Matrix build_phi(const ObservabilityMatrix& obs, int n_z);

/// Maps vec_row(O) to vec_row([g_1 ... g_n]) for fixed B_K: vec_row(O) * E.
Matrix build_e(const Matrix& B_K, int n, int n_y);

RowVector ols_eta(const MarkovEstimate& markov, const ObservabilityMatrix& obs);

/// d vec_row(O) / d a as [0, S_1, ..., S_{n-1}], a_count x n n_y n_x.
Matrix sensitivity_Sn(const CanonicalStructure& structure, const Matrix& A_K, const Matrix& C, int n);

/// Maps a matrix X (columns in vec_row(g) space) to its whitened form.
using Whitener = std::function<Matrix(const Matrix&)>;

/// argmin || W (g - eta Phi)^T || for a whitening operator W.
RowVector weighted_eta_solve(const RowVector& g, const Matrix& phi, const Whitener& whiten);

/// First-order propagation of the Step-3 error through each equation:
/// a_wls - a = -vec_row(g~) * G. Columns follow the flattened a-order.
Matrix a_error_gain(const HankelStack& hankel, const MarkovEstimate& markov, const std::vector<RowVector>& a_rows,
                    std::vector<std::string>* warnings = nullptr);

RowVector wls_eta(const MarkovEstimate& markov, const HankelStack& hankel, const std::vector<RowVector>& a_rows,
                  RowVector eta, int iterations = 1, std::vector<std::string>* warnings = nullptr);

}  // namespace wnsf
