#include "wnsf/hoarx.hpp"

#include "wnsf/model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <sstream>

namespace wnsf {

std::vector<Matrix> MarkovEstimate::markov() const {
  std::vector<Matrix> g;
  for (int i = 0; i < order; ++i) g.push_back(g_hat.middleCols(i * n_z(), n_z()));
  return g;
}

Matrix MarkovEstimate::gram_whiten(const Matrix& x) const {
  return gram_chol.triangularView<Eigen::Lower>().solve(x);
}

Matrix MarkovEstimate::gram_solve(const Matrix& x) const {
  return gram_chol.triangularView<Eigen::Lower>().transpose().solve(gram_whiten(x));
}

MarkovEstimate MarkovEstimate::from_exact(const std::vector<Matrix>& g, int n_u, Index samples,
                                          const Matrix& gram, double sigma_e2) {
  if (g.empty()) throw_invalid("hoarx", "no Markov parameters given");
  MarkovEstimate m;
  m.n_y = static_cast<int>(g.front().rows());
  m.n_u = n_u;
  if (g.front().cols() != m.n_z()) throw_invalid("hoarx", "Markov parameter width must be n_u + n_y");
  m.order = static_cast<int>(g.size());
  m.g_hat = markov_row(g);
  const Index dim = static_cast<Index>(m.order) * m.n_z();
  m.gram = gram.size() == 0 ? Matrix(Matrix::Identity(dim, dim)) : gram;
  if (m.gram.rows() != dim || m.gram.cols() != dim) throw_invalid("hoarx", "gram has the wrong size");
  Eigen::LLT<Matrix> llt(m.gram);
  if (llt.info() != Eigen::Success) throw_numerical("hoarx", "gram is not positive definite");
  m.gram_chol = llt.matrixL();
  m.effective_samples = samples;
  m.sigma_e2_hat = sigma_e2;
  return m;
}

Index hoarx_rows(Index samples, int n) { return samples - n; }

Regressors build_regressors(const Dataset& data, int n) {
  if (n < 1) throw_invalid("hoarx", "order must be positive");
  if (n >= data.samples()) throw_invalid("hoarx", "insufficient data for order " + std::to_string(n));
  const Matrix z = data.z();
  const Index rows = hoarx_rows(data.samples(), n);
  const int nz = data.n_z();
  Regressors r{data.y().bottomRows(rows), Matrix(rows, static_cast<Index>(n) * nz)};
  for (int lag = 1; lag <= n; ++lag) r.regressors.middleCols((lag - 1) * nz, nz) = z.middleRows(n - lag, rows);
  return r;
}

double default_ridge(const Matrix& gram) { return 1e-10 * gram.trace() / static_cast<double>(gram.rows()); }

MarkovEstimate estimate_hoarx(const Dataset& data, int n, double ridge) {
  if (n < 1) throw_invalid("hoarx", "order must be positive");
  if (ridge < 0.0) throw_invalid("hoarx", "ridge must be non-negative");
  if (n >= data.samples()) throw_invalid("hoarx", "insufficient data for order " + std::to_string(n));

  const Matrix z = data.z();
  const Index nbar = data.samples();
  const Index rows = hoarx_rows(nbar, n);
  const int nz = data.n_z();
  const int ny = data.n_y();
  const Index dim = static_cast<Index>(n) * nz;

  // First block row directly, the rest by the shift recursion
  //   S(i+1, j+1) = S(i, j) + z_{n-1-i} z_{n-1-j}^T - z_{nbar-1-i} z_{nbar-1-j}^T.
  Matrix s(dim, dim);
  const auto lagged = [&](int lag) { return z.middleRows(n - lag, rows); };
  const Matrix first = lagged(1).transpose();
  for (int j = 1; j <= n; ++j) s.block(0, (j - 1) * nz, nz, nz).noalias() = first * lagged(j);
  for (int i = 1; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      // Block (i+1, j+1) from block (i, j), lags 1-based.
      auto prev = s.block((i - 1) * nz, (j - 1) * nz, nz, nz);
      Matrix next = prev;
      next.noalias() += z.row(n - 1 - i).transpose() * z.row(n - 1 - j);
      next.noalias() -= z.row(nbar - 1 - i).transpose() * z.row(nbar - 1 - j);
      s.block(i * nz, j * nz, nz, nz) = next;
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) s.block(i * nz, j * nz, nz, nz) = s.block(j * nz, i * nz, nz, nz).transpose();

  Matrix r(ny, dim);
  const Matrix y_seg_t = data.y().bottomRows(rows).transpose();
  for (int j = 1; j <= n; ++j) r.middleCols((j - 1) * nz, nz).noalias() = y_seg_t * lagged(j);

  MarkovEstimate est;
  est.n_u = data.n_u();
  est.n_y = ny;
  est.order = n;
  est.effective_samples = rows;
  est.ridge = ridge;
  est.gram = s / static_cast<double>(rows);
  r /= static_cast<double>(rows);

  Matrix regularized = est.gram;
  regularized.diagonal().array() += ridge;
  Eigen::LLT<Matrix> llt(regularized);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-13) {
    const double lmin = Eigen::SelfAdjointEigenSolver<Matrix>(regularized, Eigen::EigenvaluesOnly).eigenvalues()(0);
    std::ostringstream os;
    os << "Gram matrix is numerically singular (smallest eigenvalue " << lmin
       << "); the data are not persistently exciting for order " << n;
    throw_numerical("hoarx", os.str());
  }
  est.gram_chol = llt.matrixL();
  est.g_hat = llt.solve(r.transpose()).transpose();

  Matrix resid = data.y().bottomRows(rows);
  for (int j = 1; j <= n; ++j)
    resid.noalias() -= lagged(j) * est.g_hat.middleCols((j - 1) * nz, nz).transpose();
  est.sigma_e2_hat = resid.squaredNorm() / (static_cast<double>(rows) * ny);
  return est;
}

}  // namespace wnsf
