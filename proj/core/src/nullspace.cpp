#include "wnsf/nullspace.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <sstream>

namespace wnsf {

Matrix HankelStack::plus() const {
  Matrix out(plus_rows.size(), full.cols());
  for (std::size_t i = 0; i < plus_rows.size(); ++i) out.row(i) = full.row(plus_rows[i]);
  return out;
}

Matrix HankelStack::minus() const {
  Matrix out(minus_rows.size(), full.cols());
  for (std::size_t i = 0; i < minus_rows.size(); ++i) out.row(i) = full.row(minus_rows[i]);
  return out;
}

RowVector HankelStack::target(int eq) const {
  return structure.target_sign() * full.row(structure.target_row(eq));
}

HankelStack build_hankel(const std::vector<Matrix>& g, const CanonicalStructure& s) {
  const int n = static_cast<int>(g.size());
  if (n <= s.n_x) throw_invalid("hankel", "HOARX order must exceed n_x");
  if (g.front().rows() != s.n_y || g.front().cols() != s.n_z())
    throw_invalid("hankel", "Markov parameter shape does not match the structure");
  HankelStack h;
  h.n = n;
  h.p = n - s.n_x;
  h.structure = s;
  h.full.resize((s.n_x + 1) * s.n_y, static_cast<Index>(h.p) * s.n_z());
  for (int i = 0; i <= s.n_x; ++i)
    for (int j = 0; j < h.p; ++j) h.full.block(i * s.n_y, j * s.n_z(), s.n_y, s.n_z()) = g[i + j];
  h.plus_rows = s.basis_row_indices;
  if (s.observer_form()) {
    h.minus_rows = {s.n_x};
  } else {
    for (int r : s.basis_row_indices) h.minus_rows.push_back(r + s.n_y);
  }
  return h;
}

HankelStack build_hankel(const MarkovEstimate& markov, const CanonicalStructure& s) {
  return build_hankel(markov.markov(), s);
}

double plus_condition(const HankelStack& hankel) {
  Eigen::JacobiSVD<Matrix> svd(hankel.plus());
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  return smin > 0.0 ? sv(0) / smin : INFINITY;
}

std::vector<RowVector> ols_a(const HankelStack& hankel) {
  const double cond = plus_condition(hankel);
  if (!(cond < 1e12)) {
    std::ostringstream os;
    os << "H+ is rank deficient (condition " << cond << "); the structure " << hankel.structure.label()
       << " is not admissible or the system is not minimal";
    throw_numerical("ols_a", os.str());
  }
  const Matrix plus_t = hankel.plus().transpose();
  Eigen::ColPivHouseholderQR<Matrix> qr(plus_t);
  std::vector<RowVector> a;
  for (int eq = 0; eq < hankel.structure.equation_count(); ++eq)
    a.push_back(qr.solve(hankel.target(eq).transpose()).transpose());
  return a;
}

RowVector row_weights(const CanonicalStructure& s, int eq, const RowVector& coeffs) {
  if (coeffs.size() != s.n_x) throw_invalid("weights", "coefficient row must have n_x entries");
  RowVector w = RowVector::Zero((s.n_x + 1) * s.n_y);
  for (int i = 0; i < s.n_x; ++i) w(s.basis_row_indices[i]) = coeffs(i);
  w(s.target_row(eq)) -= s.target_sign();
  return w;
}

Matrix build_kn(const RowVector& w, int n, int p, int n_y, int n_z) {
  const int blocks = static_cast<int>(w.size()) / n_y;  // n_x + 1
  if (blocks * n_y != w.size()) throw_invalid("kn", "weight length must be a multiple of n_y");
  if (p < 1 || n != p + blocks - 1) throw_invalid("kn", "need n = p + n_x");
  Matrix k = Matrix::Zero(static_cast<Index>(n_y) * n * n_z, static_cast<Index>(p) * n_z);
  for (int j = 0; j < n_y; ++j)
    for (int m = 0; m < p; ++m)
      for (int b = 0; b < blocks; ++b) {
        const double v = w(b * n_y + j);
        if (v == 0.0) continue;
        const int l = m + b;
        for (int c = 0; c < n_z; ++c)
          k(static_cast<Index>(j) * n * n_z + static_cast<Index>(l) * n_z + c, static_cast<Index>(m) * n_z + c) = v;
      }
  return k;
}

std::vector<Matrix> build_kn_a(const std::vector<RowVector>& a_rows, int n, int p, const CanonicalStructure& s) {
  std::vector<Matrix> out;
  for (int eq = 0; eq < s.equation_count(); ++eq)
    out.push_back(build_kn(row_weights(s, eq, a_rows.at(eq)), n, p, s.n_y, s.n_z()));
  return out;
}

WeightingMatrix build_weighting(const Matrix& kn, const MarkovEstimate& markov, const std::string& source,
                                std::vector<std::string>* warnings) {
  const Index block = static_cast<Index>(markov.order) * markov.n_z();
  if (kn.rows() != block * markov.n_y) throw_invalid("weighting", "K_n does not match the HOARX dimensions");
  const Index dim = kn.cols();
  WeightingMatrix w;
  w.source = source;
  w.lambda = Matrix::Zero(dim, dim);
  for (int j = 0; j < markov.n_y; ++j) {
    Matrix whitened = markov.gram_whiten(kn.middleRows(j * block, block));
    w.lambda.selfadjointView<Eigen::Lower>().rankUpdate(whitened.transpose());
  }
  w.lambda = w.lambda.selfadjointView<Eigen::Lower>();

  Eigen::LLT<Matrix> llt(w.lambda);
  if (llt.info() != Eigen::Success) {
    const double ridge = 1e-12 * w.lambda.trace() / static_cast<double>(dim);
    w.lambda.diagonal().array() += ridge;
    llt.compute(w.lambda);
    if (llt.info() != Eigen::Success) throw_numerical(source, "weighting matrix is singular");
    w.regularized = true;
    if (warnings) warnings->push_back(source + ": weighting matrix regularized with a tiny ridge");
  }
  w.chol = llt.matrixL();
  return w;
}

WeightingMatrix identity_weighting(Index dim) {
  WeightingMatrix w;
  w.lambda = Matrix::Identity(dim, dim);
  w.chol = w.lambda;
  w.source = "identity";
  return w;
}

RowVector weighted_row_solve(const Matrix& plus, const RowVector& target, const WeightingMatrix& w) {
  const auto l = w.chol.triangularView<Eigen::Lower>();
  Matrix x = l.solve(plus.transpose());
  Vector y = l.solve(target.transpose());
  return x.colPivHouseholderQr().solve(y).transpose();
}

std::vector<RowVector> wls_a(const HankelStack& hankel, const MarkovEstimate& markov, std::vector<RowVector> a,
                             int iterations, std::vector<std::string>* warnings) {
  if (iterations < 1) throw_invalid("wls_a", "iterations must be at least 1");
  const CanonicalStructure& s = hankel.structure;
  if (static_cast<int>(a.size()) != s.equation_count()) throw_invalid("wls_a", "wrong number of a-rows");
  const Matrix plus = hankel.plus();
  for (int it = 0; it < iterations; ++it) {
    std::vector<RowVector> next;
    for (int eq = 0; eq < s.equation_count(); ++eq) {
      Matrix kn = build_kn(row_weights(s, eq, a[eq]), hankel.n, hankel.p, s.n_y, s.n_z());
      WeightingMatrix w = build_weighting(kn, markov, "wls_a", warnings);
      next.push_back(weighted_row_solve(plus, hankel.target(eq), w));
    }
    a = std::move(next);
  }
  return a;
}

double nullspace_residual(const HankelStack& hankel, const std::vector<RowVector>& a_rows) {
  const Matrix plus = hankel.plus();
  double sq = 0.0;
  for (int eq = 0; eq < hankel.structure.equation_count(); ++eq)
    sq += (a_rows.at(eq) * plus - hankel.target(eq)).squaredNorm();
  return std::sqrt(sq);
}

}  // namespace wnsf
