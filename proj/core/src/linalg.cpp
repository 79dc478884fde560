#include "wnsf/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace wnsf {

Error::Error(ErrorKind kind, std::string step, const std::string& message)
    : std::runtime_error(step + ": " + message), kind_(kind), step_(std::move(step)) {}

void throw_invalid(const std::string& step, const std::string& message) {
  throw Error(ErrorKind::InvalidInput, step, message);
}

void throw_numerical(const std::string& step, const std::string& message) {
  throw Error(ErrorKind::Numerical, step, message);
}

RowVector vec_row(const Matrix& m) {
  RowVector v(m.size());
  for (Index i = 0; i < m.rows(); ++i) v.segment(i * m.cols(), m.cols()) = m.row(i);
  return v;
}

Matrix unvec_row(const RowVector& v, Index rows, Index cols) {
  if (v.size() != rows * cols) throw_invalid("vec_row", "length does not match shape");
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) m.row(i) = v.segment(i * cols, cols);
  return m;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

double spectral_radius(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

constexpr Index kDirectLyapunovLimit = 20;

Matrix lyapunov_direct(const Matrix& a, const Matrix& q) {
  const Index n = a.rows();
  // Column-major vec: vec(A X A^T) = (A kron A) vec(X).
  Matrix lhs = Matrix::Identity(n * n, n * n) - kron(a, a);
  Vector rhs = Eigen::Map<const Vector>(q.data(), n * n);
  Vector x = lhs.partialPivLu().solve(rhs);
  Matrix out = Eigen::Map<Matrix>(x.data(), n, n);
  return 0.5 * (out + out.transpose());
}

Matrix lyapunov_smith(const Matrix& a, const Matrix& q) {
  Matrix x = q;
  Matrix ak = a;
  for (int it = 0; it < 200; ++it) {
    Matrix inc = ak * x * ak.transpose();
    x += inc;
    ak = ak * ak;
    const double scale = std::max(1.0, x.norm());
    if (inc.norm() <= 1e-16 * scale && ak.norm() <= 1e-16) return 0.5 * (x + x.transpose());
    if (!x.allFinite()) break;
  }
  throw_numerical("lyapunov", "squared Smith iteration did not converge");
}

}  // namespace

Matrix solve_discrete_lyapunov(const Matrix& a, const Matrix& q) {
  if (a.rows() != a.cols() || q.rows() != a.rows() || q.cols() != a.rows())
    throw_invalid("lyapunov", "dimension mismatch");
  if (a.rows() == 0) return Matrix(0, 0);
  if (spectral_radius(a) >= 1.0) throw_numerical("lyapunov", "matrix is not Schur stable");
  if (a.rows() <= kDirectLyapunovLimit) return lyapunov_direct(a, q);
  return lyapunov_smith(a, q);
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace wnsf
