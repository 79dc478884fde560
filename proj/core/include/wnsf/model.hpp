#pragma once

#include "wnsf/dataset.hpp"
#include "wnsf/linalg.hpp"

#include <optional>
#include <string>
#include <vector>

namespace wnsf {

/// Free-parameter layout of a canonical predictor form.
///
/// For n_y = 1 this is the observer form: A_K has -a_1..-a_{n_x} in its first
/// column and a shifted identity to the right, C = e_1^T. The single a-row is
/// stored as [a_{n_x}, ..., a_1].
///
/// For n_y > 1 the states are grouped per output: output j owns nu_j states.
/// Each state shifts into the next state of the same output, except the last
/// one, whose row of A_K is free. Row j of C picks the first state of output j.
struct CanonicalStructure {
  int n_x = 0;
  int n_y = 0;
  int n_u = 0;
  std::vector<int> kronecker_index;
  std::vector<int> free_row_indices;   ///< rows of A_K holding free parameters
  std::vector<int> basis_row_indices;  ///< Hankel rows (0-based) forming the basis, in state order

  static CanonicalStructure make(int n_u, std::vector<int> kronecker_index);

  bool observer_form() const { return n_y == 1; }
  int n_z() const { return n_u + n_y; }
  int equation_count() const { return n_y; }
  int a_count() const { return n_y * n_x; }
  int eta_count() const { return n_x * n_z(); }
  int parameter_count() const { return a_count() + eta_count(); }
  int state_offset(int output) const;

  /// Hankel row (0-based) that equation `eq` fits from the basis rows.
  int target_row(int eq) const;
  /// Sign s in a_eq * H^+ = s * h_target.
  double target_sign() const { return observer_form() ? -1.0 : 1.0; }

  Matrix canonical_c() const;
  /// Derivative of vec_row(A_K) with respect to the a-parameters, (a_count x n_x^2).
  Matrix a_jacobian() const;
  /// Derivative of A_K with respect to a-parameter q (flattened a-order).
  Matrix a_derivative(int q) const;

  std::string label() const;
  std::vector<std::string> parameter_names() const;

  bool operator==(const CanonicalStructure& other) const {
    return n_u == other.n_u && kronecker_index == other.kronecker_index;
  }
};

/// Canonical free parameters: one a-row per equation plus eta = vec_row([B K]).
struct ParameterVector {
  std::vector<RowVector> a_rows;
  RowVector eta;

  Vector flatten() const;
  static ParameterVector unflatten(const Vector& theta, const CanonicalStructure& structure);
  RowVector a_flat() const;
};

/// Innovations-form model x+ = A x + B u + K e, y = C x + e.
class StateSpaceModel {
 public:
  StateSpaceModel() = default;
  /// Validates dimensions and predictor stability.
  StateSpaceModel(Matrix A, Matrix B, Matrix C, Matrix K, double sigma_e2);

  /// Builds from predictor matrices; A = A_K + K C. Validates like the main constructor.
  static StateSpaceModel from_predictor(Matrix A_K, Matrix B_K, Matrix C, int n_u, double sigma_e2);
  /// Same, without the predictor stability check. Estimates may be unstable.
  static StateSpaceModel from_predictor_unchecked(Matrix A_K, Matrix B_K, Matrix C, int n_u,
                                                  double sigma_e2);

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const Matrix& C() const { return C_; }
  const Matrix& K() const { return K_; }
  const Matrix& A_K() const { return A_K_; }
  Matrix B_K() const;
  double sigma_e2() const { return sigma_e2_; }

  int n_x() const { return static_cast<int>(A_.rows()); }
  int n_u() const { return static_cast<int>(B_.cols()); }
  int n_y() const { return static_cast<int>(C_.rows()); }
  int n_z() const { return n_u() + n_y(); }

  double predictor_spectral_radius() const { return spectral_radius(A_K_); }
  bool predictor_stable() const;

  const std::optional<std::vector<int>>& kronecker_index() const { return kronecker_index_; }
  void set_kronecker_index(std::optional<std::vector<int>> index) { kronecker_index_ = std::move(index); }
  void set_sigma_e2(double s);

 private:
  void check_dimensions() const;

  Matrix A_, B_, C_, K_, A_K_;
  double sigma_e2_ = 1.0;
  std::optional<std::vector<int>> kronecker_index_;
};

struct PredictorForm {
  Matrix A_K;
  Matrix B_K;
};

PredictorForm to_predictor_form(const StateSpaceModel& model);

/// g_i = C A_K^{i-1} B_K for i = 1..n.
std::vector<Matrix> markov_parameters(const Matrix& A_K, const Matrix& B_K, const Matrix& C, int n);
std::vector<Matrix> markov_parameters(const StateSpaceModel& model, int n);

/// [g_1 ... g_n] side by side (n_y x n * n_z).
Matrix markov_row(const std::vector<Matrix>& g);
std::vector<Matrix> split_markov_row(const Matrix& row, int n_z);

struct AssembledModel {
  StateSpaceModel model;
  bool predictor_stable = false;
  double predictor_radius = 0.0;
};

AssembledModel assemble_from_parameters(const ParameterVector& params, const CanonicalStructure& structure,
                                        double sigma_e2 = 1.0);

/// Reads the free parameters of a model already in the given canonical form.
ParameterVector extract_parameters(const StateSpaceModel& model, const CanonicalStructure& structure);

/// All Kronecker indices of n_x into n_y parts, lexicographic.
std::vector<CanonicalStructure> enumerate_kronecker_indices(int n_x, int n_y, int n_u);

struct AdmissibilityResult {
  bool admissible = false;
  double condition = 0.0;         ///< condition number of the selected row block
  double smallest_singular = 0.0; ///< of the selected row block, relative to the full Hankel
  double residual = 0.0;          ///< projection residual of the other rows, relative
};

/// Rank test for the basis rows of the Hankel built from g. tol <= 0 picks 1e-8.
AdmissibilityResult check_admissibility(const std::vector<Matrix>& markov, const CanonicalStructure& structure,
                                        double tol = -1.0);

/// Similarity transform into the canonical form. Throws if the structure is not admissible.
StateSpaceModel to_canonical(const StateSpaceModel& model, const CanonicalStructure& structure);

struct Prediction {
  Matrix y_hat;
  Matrix residuals;
};

/// One-step-ahead predictor from zero initial state.
Prediction predict_one_step(const StateSpaceModel& model, const Dataset& data);

}  // namespace wnsf
