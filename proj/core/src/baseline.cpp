#include "wnsf/baseline.hpp"

#include <Eigen/SVD>

#include <sstream>

namespace wnsf {

namespace {

Matrix checked_inverse(const Matrix& w, Index dim, const char* name) {
  if (w.size() == 0) return Matrix::Identity(dim, dim);
  if (w.rows() != dim || w.cols() != dim)
    throw_invalid("baseline", std::string(name) + " must be " + std::to_string(dim) + " x " + std::to_string(dim));
  Eigen::FullPivLU<Matrix> lu(w);
  if (!lu.isInvertible()) throw_invalid("baseline", std::string(name) + " is not invertible");
  return lu.inverse();
}

}  // namespace

HoKalmanResult ho_kalman(const MarkovEstimate& markov, int n_x, int f, int p, const Matrix& W1, const Matrix& W2) {
  const int ny = markov.n_y;
  const int nz = markov.n_z();
  if (n_x < 1) throw_invalid("baseline", "n_x must be positive");
  if (f < 2 || p < 1) throw_invalid("baseline", "need f >= 2 and p >= 1");
  if (f + p - 1 > markov.order) throw_invalid("baseline", "f + p - 1 exceeds the number of Markov parameters");
  if ((f - 1) * ny < n_x || p * nz < n_x) throw_invalid("baseline", "Hankel too small for the requested order");

  const std::vector<Matrix> g = markov.markov();
  Matrix h(static_cast<Index>(f) * ny, static_cast<Index>(p) * nz);
  for (int i = 0; i < f; ++i)
    for (int j = 0; j < p; ++j) h.block(i * ny, j * nz, ny, nz) = g[i + j];

  const Index rows = h.rows();
  const Index cols = h.cols();
  const Matrix w1 = W1.size() ? W1 : Matrix::Identity(rows, rows);
  const Matrix w2 = W2.size() ? W2 : Matrix::Identity(cols, cols);
  const Matrix w1_inv = checked_inverse(W1, rows, "W1");
  const Matrix w2_inv = checked_inverse(W2, cols, "W2");

  Eigen::JacobiSVD<Matrix> svd(w1 * h * w2, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Matrix u = svd.matrixU().leftCols(n_x);
  Matrix v = svd.matrixV().leftCols(n_x);
  const Vector s = svd.singularValues();
  for (int c = 0; c < n_x; ++c) {
    Index at = 0;
    u.col(c).cwiseAbs().maxCoeff(&at);
    if (u(at, c) < 0.0) {
      u.col(c) *= -1.0;
      v.col(c) *= -1.0;
    }
  }

  HoKalmanResult out;
  out.singular_values = s;
  if (s(n_x - 1) <= 0.0) throw_numerical("baseline", "Hankel rank is below n_x");
  if (n_x < s.size() && s(n_x - 1) < 1.5 * s(n_x)) {
    out.ambiguous_order = true;
    std::ostringstream os;
    os << "singular value gap " << s(n_x - 1) / s(n_x) << " < 1.5; the order is ambiguous";
    out.warnings.push_back(os.str());
  }

  const Vector root = s.head(n_x).cwiseSqrt();
  const Matrix obs = w1_inv * u * root.asDiagonal();
  const Matrix ctr = root.asDiagonal() * v.transpose() * w2_inv;
  const Index shift = rows - ny;
  const Matrix ak = obs.topRows(shift).colPivHouseholderQr().solve(obs.bottomRows(shift));
  const Matrix c = obs.topRows(ny);
  const Matrix bk = ctr.leftCols(nz);

  out.model = StateSpaceModel::from_predictor_unchecked(ak, bk, c, markov.n_u, markov.sigma_e2_hat);
  out.predictor_stable = out.model.predictor_stable();
  if (!out.predictor_stable) out.warnings.push_back("realized predictor is not stable");
  return out;
}

HoKalmanResult ho_kalman(const MarkovEstimate& markov, int n_x) {
  const int f = (markov.order + 1) / 2;
  return ho_kalman(markov, n_x, f, markov.order + 1 - f);
}

}  // namespace wnsf
