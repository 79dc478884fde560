#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace wnsf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

enum class ErrorKind { InvalidInput, Numerical };

/// Library error. `step()` names the stage that failed (e.g. "hoarx", "wls_a").
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string step, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& step() const noexcept { return step_; }

 private:
  ErrorKind kind_;
  std::string step_;
};

[[noreturn]] void throw_invalid(const std::string& step, const std::string& message);
[[noreturn]] void throw_numerical(const std::string& step, const std::string& message);

/// Row-major vectorization: entry (i, j) lands at i * cols + j.
RowVector vec_row(const Matrix& m);
Matrix unvec_row(const RowVector& v, Index rows, Index cols);

Matrix kron(const Matrix& a, const Matrix& b);

double spectral_radius(const Matrix& m);

/// Solves X = A X A^T + Q for Schur-stable A.
/// Small problems use the Kronecker form directly, larger ones squared Smith iteration.
Matrix solve_discrete_lyapunov(const Matrix& a, const Matrix& q);

/// Largest entry-wise absolute difference.
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace wnsf
