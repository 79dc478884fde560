#include "wnsf/bkfit.hpp"

#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <sstream>

namespace wnsf {

ObservabilityMatrix extended_observability(const Matrix& A_K, const Matrix& C, int n) {
  if (n < 1) throw_invalid("observability", "need at least one block");
  if (A_K.rows() != A_K.cols() || C.cols() != A_K.rows()) throw_invalid("observability", "dimension mismatch");
  ObservabilityMatrix obs;
  obs.n = n;
  obs.n_y = static_cast<int>(C.rows());
  obs.O.resize(static_cast<Index>(n) * C.rows(), C.cols());
  Matrix block = C;
  for (int k = 0; k < n; ++k) {
    obs.O.middleRows(k * C.rows(), C.rows()) = block;
    block = block * A_K;
  }
  return obs;
}

Matrix build_phi(const ObservabilityMatrix& obs, int n_z) {
  const Index nx = obs.O.cols();
  const Index n = obs.n;
  const Index ny = obs.n_y;
  Matrix phi = Matrix::Zero(nx * n_z, ny * n * n_z);
  for (Index j = 0; j < ny; ++j)
    for (Index l = 0; l < n; ++l)
      for (Index s = 0; s < nx; ++s) {
        const double v = obs.O(l * ny + j, s);
        for (Index c = 0; c < n_z; ++c) phi(s * n_z + c, j * n * n_z + l * n_z + c) = v;
      }
  return phi;
}

Matrix build_e(const Matrix& B_K, int n, int n_y) {
  const Index nx = B_K.rows();
  const Index nz = B_K.cols();
  Matrix e = Matrix::Zero(static_cast<Index>(n) * n_y * nx, static_cast<Index>(n_y) * n * nz);
  for (Index l = 0; l < n; ++l)
    for (Index j = 0; j < n_y; ++j)
      for (Index s = 0; s < nx; ++s)
        e.block((l * n_y + j) * nx + s, j * n * nz + l * nz, 1, nz) = B_K.row(s);
  return e;
}

RowVector weighted_eta_solve(const RowVector& g, const Matrix& phi, const Whitener& whiten) {
  if (g.size() != phi.cols()) throw_invalid("eta", "Markov row does not match Phi");
  Matrix x = whiten(phi.transpose());
  Vector y = whiten(g.transpose());
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  if (qr.rank() < x.cols()) throw_numerical("eta", "Phi is rank deficient (unobservable A_K estimate)");
  return qr.solve(y).transpose();
}

RowVector ols_eta(const MarkovEstimate& markov, const ObservabilityMatrix& obs) {
  if (obs.n != markov.order || obs.n_y != markov.n_y) throw_invalid("ols_eta", "observability matrix size mismatch");
  Eigen::JacobiSVD<Matrix> svd(obs.O);
  const auto& sv = svd.singularValues();
  if (!(sv(sv.size() - 1) > 1e-12 * sv(0)))
    throw_numerical("ols_eta", "extended observability matrix is rank deficient");
  Matrix phi = build_phi(obs, markov.n_z());
  return weighted_eta_solve(vec_row(markov.g_hat), phi, [](const Matrix& x) { return x; });
}

Matrix sensitivity_Sn(const CanonicalStructure& s, const Matrix& A_K, const Matrix& C, int n) {
  const Index nx = s.n_x;
  const Index ny = s.n_y;
  const Index width = ny * nx;
  const Matrix j = s.a_jacobian();
  Matrix out = Matrix::Zero(s.a_count(), static_cast<Index>(n) * width);
  if (n < 2) return out;
  const Matrix eye = Matrix::Identity(nx, nx);
  const Matrix shift = kron(Matrix::Identity(ny, ny), A_K);
  // Q_k = sum_{i<k} (C A^i)^T kron A^{k-1-i};  Q_{k+1} = Q_k (I kron A) + (C A^k)^T kron I.
  Matrix q = kron(C.transpose(), eye);
  Matrix ca = C * A_K;
  for (int k = 1; k < n; ++k) {
    out.middleCols(k * width, width).noalias() = j * q;
    if (k + 1 < n) {
      q = q * shift + kron(ca.transpose(), eye);
      ca = ca * A_K;
    }
  }
  return out;
}

Matrix a_error_gain(const HankelStack& hankel, const MarkovEstimate& markov, const std::vector<RowVector>& a_rows,
                    std::vector<std::string>* warnings) {
  const CanonicalStructure& s = hankel.structure;
  const Matrix plus = hankel.plus();
  const Index dim = static_cast<Index>(s.n_y) * hankel.n * s.n_z();
  Matrix gain(dim, s.a_count());
  for (int eq = 0; eq < s.equation_count(); ++eq) {
    Matrix kn = build_kn(row_weights(s, eq, a_rows.at(eq)), hankel.n, hankel.p, s.n_y, s.n_z());
    WeightingMatrix w = build_weighting(kn, markov, "wls_eta", warnings);
    const Matrix half = w.chol.triangularView<Eigen::Lower>().solve(plus.transpose());
    Matrix z = w.chol.transpose().triangularView<Eigen::Upper>().solve(half);  // Lambda^{-1} H+^T
    Matrix m = plus * z;
    gain.middleCols(eq * s.n_x, s.n_x) = kn * z * m.inverse();
  }
  return gain;
}

RowVector wls_eta(const MarkovEstimate& markov, const HankelStack& hankel, const std::vector<RowVector>& a_rows,
                  RowVector eta, int iterations, std::vector<std::string>* warnings) {
  if (iterations < 1) throw_invalid("wls_eta", "iterations must be at least 1");
  const CanonicalStructure& s = hankel.structure;
  if (eta.size() != s.eta_count()) throw_invalid("wls_eta", "eta has the wrong length");
  const int n = markov.order;
  const Index block = static_cast<Index>(n) * s.n_z();

  ParameterVector shape{a_rows, RowVector::Zero(s.eta_count())};
  const Matrix ak = assemble_from_parameters(shape, s).model.A_K();
  const Matrix c = s.canonical_c();
  const Matrix phi = build_phi(extended_observability(ak, c, n), s.n_z());
  const Matrix gain = a_error_gain(hankel, markov, a_rows, warnings);
  const Matrix sens = sensitivity_Sn(s, ak, c, n);
  const RowVector g = vec_row(markov.g_hat);

  const int na = s.a_count();
  auto gram_apply = [&](Matrix x) {
    for (int j = 0; j < s.n_y; ++j) {
      auto rows = x.middleRows(j * block, block);
      rows = markov.gram_chol * (markov.gram_chol.transpose() * rows);
    }
    return x;
  };
  for (int it = 0; it < iterations; ++it) {
    // The residual map K = I + G V (V = S E) satisfies V G = -I, so K and the residual
    // covariance K^T R^{-1} K are singular along range(G). Completing K with R V^T G^T
    // gives a generalized inverse of that covariance; Phi G = 0 keeps the estimate the same.
    // M^T = I + P Q with P = [V^T, G], Q = [G^T; V R], inverted with Woodbury.
    const Matrix vt = build_e(unvec_row(eta, s.n_x, s.n_z()), n, s.n_y).transpose() * sens.transpose();
    Matrix p(vt.rows(), 2 * na);
    p << vt, gain;
    Matrix q(2 * na, vt.rows());
    q << gain.transpose(), gram_apply(vt).transpose();
    Matrix core = Matrix::Identity(2 * na, 2 * na);
    core.noalias() += q * p;
    Eigen::PartialPivLU<Matrix> lu(core);
    const Whitener whiten = [&](const Matrix& x) {
      Matrix y = x - p * lu.solve(q * x);
      for (int j = 0; j < s.n_y; ++j) {
        auto rows = y.middleRows(j * block, block);
        rows = markov.gram_chol.transpose() * rows;
      }
      return y;
    };
    eta = weighted_eta_solve(g, phi, whiten);
  }
  return eta;
}

}  // namespace wnsf
