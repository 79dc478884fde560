#pragma once

#include "wnsf/linalg.hpp"
#include "wnsf/model.hpp"
#include "wnsf/simulate.hpp"

#include <string>
#include <vector>

namespace wnsf {

/// Derivatives of (A, B, K) with respect to each parameter. C is fixed.
struct SensitivitySet {
  std::vector<Matrix> A_i;
  std::vector<Matrix> B_i;
  std::vector<Matrix> K_i;
  std::vector<std::string> names;

  std::size_t size() const { return A_i.size(); }
};

/// One-hot derivatives for every free parameter of a canonical structure, flattened order.
SensitivitySet canonical_sensitivities(const CanonicalStructure& structure);

/// SISO ARMAX parameters theta = (f_1..f_n, l_1..l_n, a_1..a_n) in the observer form;
/// without input theta = (f, a).
SensitivitySet armax_sensitivities(int n_x, int n_u);

/// theta_armax = T theta_canonical for the SISO observer form.
Matrix canonical_to_armax_jacobian(int n_x, int n_u);

struct ArmaxPolynomials {
  std::vector<double> f;  ///< f_1..f_n of F(q) = 1 + f_1 q^-1 + ...
  std::vector<double> l;  ///< l_1..l_n of L(q) = l_1 q^-1 + ...; empty without input
  std::vector<double> a;  ///< a_1..a_n of A(q) = 1 + a_1 q^-1 + ...
};

/// f = a - k, l = b from a SISO model in observer form.
ArmaxPolynomials armax_from_canonical(const StateSpaceModel& model);
Vector armax_vector(const ArmaxPolynomials& p);

struct RiccatiSolution {
  Matrix P;
  Matrix Q;
  Matrix gain;
  int iterations = 0;
};

/// Stationary Kalman filter for the innovations model (R1 = s K K^T, R12 = s K, R2 = s I).
RiccatiSolution solve_riccati(const StateSpaceModel& model);

struct SensitivityCovariance {
  Matrix P_i;
  Matrix Q_i;
};

std::vector<SensitivityCovariance> sensitivity_lyapunov(const StateSpaceModel& model, const SensitivitySet& sens,
                                                        const Matrix& P);

struct CrlbResult {
  Matrix M;           ///< E[psi psi^T], so sigma_e2 * M^{-1} is the asymptotic covariance
  Matrix covariance;  ///< sigma_e2 * M^{-1}, empty if M is singular
  bool singular = false;
  double min_eigenvalue = 0.0;
  std::vector<std::string> names;
};

/// Lyapunov route on the augmented plant/excitation/controller/sensitivity system.
CrlbResult crlb(const StateSpaceModel& model, const SensitivitySet& sens, const ExperimentConfig& experiment);
CrlbResult crlb(const StateSpaceModel& model, const CanonicalStructure& structure,
                const ExperimentConfig& experiment);

/// Frequency-domain quadrature (periodic trapezoid) of Phi diag(Psi_r, sigma_e2) Phi^*.
Matrix frequency_crlb_siso(const ArmaxPolynomials& poly, double sigma_e2, const ExperimentConfig& experiment,
                           int grid_points = 1 << 14);

}  // namespace wnsf
