#include "wnsf/model.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace wnsf {

namespace {

constexpr double kStabilitySlack = 1e-10;

std::string shape(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------- structure

CanonicalStructure CanonicalStructure::make(int n_u, std::vector<int> kronecker_index) {
  if (n_u < 0) throw_invalid("structure", "negative input count");
  if (kronecker_index.empty()) throw_invalid("structure", "empty Kronecker index");
  for (int v : kronecker_index)
    if (v <= 0) throw_invalid("structure", "Kronecker index entries must be positive");

  CanonicalStructure s;
  s.n_u = n_u;
  s.n_y = static_cast<int>(kronecker_index.size());
  s.n_x = std::accumulate(kronecker_index.begin(), kronecker_index.end(), 0);
  s.kronecker_index = std::move(kronecker_index);

  if (s.observer_form()) {
    s.free_row_indices.resize(s.n_x);
    std::iota(s.free_row_indices.begin(), s.free_row_indices.end(), 0);
  } else {
    for (int j = 0; j < s.n_y; ++j) s.free_row_indices.push_back(s.state_offset(j) + s.kronecker_index[j] - 1);
  }
  for (int j = 0; j < s.n_y; ++j)
    for (int k = 0; k < s.kronecker_index[j]; ++k) s.basis_row_indices.push_back(k * s.n_y + j);
  return s;
}

int CanonicalStructure::state_offset(int output) const {
  int off = 0;
  for (int j = 0; j < output; ++j) off += kronecker_index[j];
  return off;
}

int CanonicalStructure::target_row(int eq) const {
  if (observer_form()) return n_x;
  return kronecker_index[eq] * n_y + eq;
}

Matrix CanonicalStructure::canonical_c() const {
  Matrix c = Matrix::Zero(n_y, n_x);
  if (observer_form()) {
    c(0, 0) = 1.0;
  } else {
    for (int j = 0; j < n_y; ++j) c(j, state_offset(j)) = 1.0;
  }
  return c;
}

Matrix CanonicalStructure::a_derivative(int q) const {
  Matrix d = Matrix::Zero(n_x, n_x);
  if (observer_form()) {
    d(n_x - 1 - q, 0) = -1.0;
  } else {
    d(free_row_indices[q / n_x], q % n_x) = 1.0;
  }
  return d;
}

Matrix CanonicalStructure::a_jacobian() const {
  Matrix j(a_count(), n_x * n_x);
  for (int q = 0; q < a_count(); ++q) j.row(q) = vec_row(a_derivative(q));
  return j;
}

std::string CanonicalStructure::label() const {
  std::string out = "{";
  for (std::size_t i = 0; i < kronecker_index.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(kronecker_index[i]);
  }
  return out + "}";
}

std::vector<std::string> CanonicalStructure::parameter_names() const {
  std::vector<std::string> names;
  if (observer_form()) {
    for (int q = 0; q < n_x; ++q) names.push_back("a" + std::to_string(n_x - q));
  } else {
    for (int q = 0; q < a_count(); ++q)
      names.push_back("aK" + std::to_string(free_row_indices[q / n_x] + 1) + "_" + std::to_string(q % n_x + 1));
  }
  for (int s = 0; s < n_x; ++s) {
    for (int c = 0; c < n_z(); ++c) {
      const bool is_b = c < n_u;
      const int col = is_b ? c : c - n_u;
      const int width = is_b ? n_u : n_y;
      std::string name = (is_b ? "b" : "k") + std::to_string(s + 1);
      if (width > 1) name += "_" + std::to_string(col + 1);
      names.push_back(name);
    }
  }
  return names;
}

// ---------------------------------------------------------------- parameters

Vector ParameterVector::flatten() const {
  Index total = eta.size();
  for (const auto& r : a_rows) total += r.size();
  Vector theta(total);
  Index pos = 0;
  for (const auto& r : a_rows) {
    theta.segment(pos, r.size()) = r.transpose();
    pos += r.size();
  }
  theta.segment(pos, eta.size()) = eta.transpose();
  return theta;
}

ParameterVector ParameterVector::unflatten(const Vector& theta, const CanonicalStructure& s) {
  if (theta.size() != s.parameter_count()) throw_invalid("parameters", "parameter vector has wrong length");
  ParameterVector p;
  for (int eq = 0; eq < s.equation_count(); ++eq) p.a_rows.push_back(theta.segment(eq * s.n_x, s.n_x).transpose());
  p.eta = theta.segment(s.a_count(), s.eta_count()).transpose();
  return p;
}

RowVector ParameterVector::a_flat() const {
  Index total = 0;
  for (const auto& r : a_rows) total += r.size();
  RowVector out(total);
  Index pos = 0;
  for (const auto& r : a_rows) {
    out.segment(pos, r.size()) = r;
    pos += r.size();
  }
  return out;
}

// ---------------------------------------------------------------- model

StateSpaceModel::StateSpaceModel(Matrix A, Matrix B, Matrix C, Matrix K, double sigma_e2)
    : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), K_(std::move(K)), sigma_e2_(sigma_e2) {
  if (B_.rows() == 0 && B_.cols() == 0) B_.resize(A_.rows(), 0);
  check_dimensions();
  A_K_ = A_ - K_ * C_;
  if (!predictor_stable())
    throw_invalid("model", "predictor is not stable: spectral radius of A - K C is " +
                               std::to_string(predictor_spectral_radius()));
}

StateSpaceModel StateSpaceModel::from_predictor(Matrix A_K, Matrix B_K, Matrix C, int n_u, double sigma_e2) {
  StateSpaceModel m = from_predictor_unchecked(std::move(A_K), std::move(B_K), std::move(C), n_u, sigma_e2);
  if (!m.predictor_stable())
    throw_invalid("model", "predictor is not stable: spectral radius of A_K is " +
                               std::to_string(m.predictor_spectral_radius()));
  return m;
}

StateSpaceModel StateSpaceModel::from_predictor_unchecked(Matrix A_K, Matrix B_K, Matrix C, int n_u,
                                                          double sigma_e2) {
  if (n_u < 0 || n_u > B_K.cols()) throw_invalid("model", "input count inconsistent with B_K");
  StateSpaceModel m;
  m.B_ = B_K.leftCols(n_u);
  m.K_ = B_K.rightCols(B_K.cols() - n_u);
  m.C_ = std::move(C);
  m.A_K_ = std::move(A_K);
  m.sigma_e2_ = sigma_e2;
  if (m.K_.cols() != m.C_.rows()) throw_invalid("model", "B_K has " + shape(B_K) + " columns, expected n_u + n_y");
  if (m.A_K_.rows() != m.A_K_.cols() || m.C_.cols() != m.A_K_.rows() || m.K_.rows() != m.A_K_.rows())
    throw_invalid("model", "predictor matrices have inconsistent dimensions");
  m.A_ = m.A_K_ + m.K_ * m.C_;
  m.check_dimensions();
  return m;
}

void StateSpaceModel::check_dimensions() const {
  const Index n = A_.rows();
  if (n == 0) throw_invalid("model", "state dimension must be positive");
  if (A_.cols() != n) throw_invalid("model", "A must be square, got " + shape(A_));
  if (B_.rows() != n) throw_invalid("model", "B must have n_x rows, got " + shape(B_));
  if (C_.cols() != n || C_.rows() == 0) throw_invalid("model", "C must be n_y x n_x, got " + shape(C_));
  if (K_.rows() != n || K_.cols() != C_.rows()) throw_invalid("model", "K must be n_x x n_y, got " + shape(K_));
  if (!(sigma_e2_ >= 0.0) || !std::isfinite(sigma_e2_)) throw_invalid("model", "sigma_e2 must be non-negative");
  if (!A_.allFinite() || !B_.allFinite() || !C_.allFinite() || !K_.allFinite())
    throw_invalid("model", "non-finite matrix entries");
}

Matrix StateSpaceModel::B_K() const {
  Matrix bk(n_x(), n_z());
  bk << B_, K_;
  return bk;
}

bool StateSpaceModel::predictor_stable() const {
  return predictor_spectral_radius() < 1.0 - kStabilitySlack;
}

void StateSpaceModel::set_sigma_e2(double s) {
  if (!(s >= 0.0) || !std::isfinite(s)) throw_invalid("model", "sigma_e2 must be non-negative");
  sigma_e2_ = s;
}

PredictorForm to_predictor_form(const StateSpaceModel& model) { return {model.A_K(), model.B_K()}; }

std::vector<Matrix> markov_parameters(const Matrix& A_K, const Matrix& B_K, const Matrix& C, int n) {
  if (n < 1) throw_invalid("markov", "need at least one Markov parameter");
  std::vector<Matrix> g;
  g.reserve(n);
  Matrix ca = C;
  for (int i = 0; i < n; ++i) {
    g.push_back(ca * B_K);
    ca = ca * A_K;
  }
  return g;
}

std::vector<Matrix> markov_parameters(const StateSpaceModel& model, int n) {
  return markov_parameters(model.A_K(), model.B_K(), model.C(), n);
}

Matrix markov_row(const std::vector<Matrix>& g) {
  if (g.empty()) return Matrix(0, 0);
  Matrix out(g.front().rows(), g.front().cols() * static_cast<Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) out.middleCols(i * g.front().cols(), g.front().cols()) = g[i];
  return out;
}

std::vector<Matrix> split_markov_row(const Matrix& row, int n_z) {
  if (n_z <= 0 || row.cols() % n_z != 0) throw_invalid("markov", "row width is not a multiple of n_z");
  std::vector<Matrix> g;
  for (Index i = 0; i < row.cols() / n_z; ++i) g.push_back(row.middleCols(i * n_z, n_z));
  return g;
}

// ---------------------------------------------------------------- canonical forms

namespace {

Matrix assemble_a_k(const std::vector<RowVector>& a_rows, const CanonicalStructure& s) {
  Matrix ak = Matrix::Zero(s.n_x, s.n_x);
  if (s.observer_form()) {
    const RowVector& a = a_rows.at(0);
    for (int i = 0; i < s.n_x; ++i) {
      ak(i, 0) = -a(s.n_x - 1 - i);
      if (i + 1 < s.n_x) ak(i, i + 1) = 1.0;
    }
    return ak;
  }
  for (int j = 0; j < s.n_y; ++j) {
    const int off = s.state_offset(j);
    for (int k = 0; k + 1 < s.kronecker_index[j]; ++k) ak(off + k, off + k + 1) = 1.0;
    ak.row(s.free_row_indices[j]) = a_rows.at(j);
  }
  return ak;
}

void check_layout(const ParameterVector& p, const CanonicalStructure& s) {
  if (static_cast<int>(p.a_rows.size()) != s.equation_count())
    throw_invalid("parameters", "expected " + std::to_string(s.equation_count()) + " a-rows");
  for (const auto& r : p.a_rows)
    if (r.size() != s.n_x) throw_invalid("parameters", "a-row length must equal n_x");
  if (p.eta.size() != s.eta_count())
    throw_invalid("parameters", "eta length must equal (n_u + n_y) n_x = " + std::to_string(s.eta_count()));
}

}  // namespace

AssembledModel assemble_from_parameters(const ParameterVector& params, const CanonicalStructure& s,
                                        double sigma_e2) {
  check_layout(params, s);
  Matrix ak = assemble_a_k(params.a_rows, s);
  Matrix bk = unvec_row(params.eta, s.n_x, s.n_z());
  AssembledModel out;
  out.model = StateSpaceModel::from_predictor_unchecked(std::move(ak), std::move(bk), s.canonical_c(), s.n_u, sigma_e2);
  out.model.set_kronecker_index(s.kronecker_index);
  out.predictor_radius = out.model.predictor_spectral_radius();
  out.predictor_stable = out.model.predictor_stable();
  return out;
}

ParameterVector extract_parameters(const StateSpaceModel& model, const CanonicalStructure& s) {
  if (model.n_x() != s.n_x || model.n_y() != s.n_y || model.n_u() != s.n_u)
    throw_invalid("parameters", "model dimensions do not match the structure");
  const Matrix& ak = model.A_K();
  ParameterVector p;
  if (s.observer_form()) {
    RowVector a(s.n_x);
    for (int i = 0; i < s.n_x; ++i) a(s.n_x - 1 - i) = -ak(i, 0);
    p.a_rows.push_back(a);
  } else {
    for (int j = 0; j < s.n_y; ++j) p.a_rows.push_back(ak.row(s.free_row_indices[j]));
  }
  // Fixed entries must already be canonical.
  Matrix expected = assemble_a_k(p.a_rows, s);
  const double scale = std::max(1.0, ak.cwiseAbs().maxCoeff());
  if (max_abs_diff(expected, ak) > 1e-9 * scale || max_abs_diff(model.C(), s.canonical_c()) > 1e-9)
    throw_invalid("parameters", "model is not in canonical form " + s.label());
  p.eta = vec_row(model.B_K());
  return p;
}

std::vector<CanonicalStructure> enumerate_kronecker_indices(int n_x, int n_y, int n_u) {
  if (n_y <= 0 || n_x <= 0) throw_invalid("structure", "n_x and n_y must be positive");
  if (n_y > n_x) throw_invalid("structure", "no Kronecker index exists when n_y > n_x");
  std::vector<CanonicalStructure> out;
  std::vector<int> parts(n_y, 1);
  // Lexicographic walk over compositions of n_x into n_y positive parts.
  auto rec = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == n_y - 1) {
      parts[pos] = remaining;
      out.push_back(CanonicalStructure::make(n_u, parts));
      return;
    }
    for (int v = 1; v <= remaining - (n_y - 1 - pos); ++v) {
      parts[pos] = v;
      self(self, pos + 1, remaining - v);
    }
  };
  rec(rec, 0, n_x);
  return out;
}

namespace {

Matrix hankel_rows(const std::vector<Matrix>& g, int block_rows, int p) {
  const Index ny = g.front().rows();
  const Index nz = g.front().cols();
  Matrix h(block_rows * ny, p * nz);
  for (int i = 0; i < block_rows; ++i)
    for (int j = 0; j < p; ++j) h.block(i * ny, j * nz, ny, nz) = g[i + j];
  return h;
}

}  // namespace

AdmissibilityResult check_admissibility(const std::vector<Matrix>& markov, const CanonicalStructure& s,
                                        double tol) {
  const int n = static_cast<int>(markov.size());
  if (n < s.n_x + 1) throw_invalid("admissibility", "need more than n_x Markov parameters");
  if (markov.front().rows() != s.n_y || markov.front().cols() != s.n_z())
    throw_invalid("admissibility", "Markov parameter shape does not match the structure");
  const int p = n - s.n_x;
  if (p * s.n_z() < s.n_x) throw_invalid("admissibility", "too few Hankel columns for a rank-n_x test");
  if (tol <= 0.0) tol = 1e-8;

  Matrix full = hankel_rows(markov, s.n_x + 1, p);
  AdmissibilityResult r;
  Eigen::JacobiSVD<Matrix> full_svd(full);
  const double smax = full_svd.singularValues()(0);
  if (!(smax > 0.0)) return r;

  Matrix sel(s.n_x, full.cols());
  for (int i = 0; i < s.n_x; ++i) sel.row(i) = full.row(s.basis_row_indices[i]);
  Eigen::JacobiSVD<Matrix> sel_svd(sel);
  const auto& sv = sel_svd.singularValues();
  r.smallest_singular = sv(sv.size() - 1) / smax;
  r.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : INFINITY;

  std::vector<bool> chosen(full.rows(), false);
  for (int i : s.basis_row_indices) chosen[i] = true;
  Matrix rest(full.rows() - s.n_x, full.cols());
  for (Index i = 0, k = 0; i < full.rows(); ++i)
    if (!chosen[i]) rest.row(k++) = full.row(i);
  if (r.smallest_singular > tol) {
    Matrix coeff = sel.transpose().colPivHouseholderQr().solve(rest.transpose()).transpose();
    r.residual = (rest - coeff * sel).norm() / smax;
  } else {
    r.residual = INFINITY;
  }
  r.admissible = r.smallest_singular > tol && r.residual < tol;
  return r;
}

StateSpaceModel to_canonical(const StateSpaceModel& model, const CanonicalStructure& s) {
  if (model.n_x() != s.n_x || model.n_y() != s.n_y || model.n_u() != s.n_u)
    throw_invalid("to_canonical", "model dimensions do not match the structure");
  const Matrix& ak = model.A_K();
  const Matrix& c = model.C();

  // Basis rows of the observability matrix, in state order.
  int max_nu = *std::max_element(s.kronecker_index.begin(), s.kronecker_index.end());
  std::vector<Matrix> ca{c};
  for (int k = 1; k < max_nu; ++k) ca.push_back(ca.back() * ak);
  Matrix t(s.n_x, s.n_x);
  int row = 0;
  for (int j = 0; j < s.n_y; ++j)
    for (int k = 0; k < s.kronecker_index[j]; ++k) t.row(row++) = ca[k].row(j);

  Eigen::FullPivLU<Matrix> lu(t);
  if (lu.rank() < s.n_x || lu.rcond() < 1e-12)
    throw_numerical("to_canonical", "structure " + s.label() + " is not admissible for this model");
  Matrix t_inv = lu.inverse();
  Matrix ak_obs = t * ak * t_inv;
  Matrix bk = t * model.B_K();

  ParameterVector p;
  if (s.observer_form()) {
    // Observability form: the last row holds -[a_{n_x} ... a_1].
    p.a_rows.push_back(-ak_obs.row(s.n_x - 1));
    Matrix ak_e13 = assemble_a_k(p.a_rows, s);
    Matrix obs(s.n_x, s.n_x);
    Matrix crow = s.canonical_c();
    for (int i = 0; i < s.n_x; ++i) {
      obs.row(i) = crow;
      crow = crow * ak_e13;
    }
    // First n_x Markov parameters fix B_K in the observer coordinates.
    Matrix gstack(s.n_x, s.n_z());
    Matrix cr = c;
    for (int i = 0; i < s.n_x; ++i) {
      gstack.row(i) = cr * model.B_K();
      cr = cr * ak;
    }
    bk = obs.lu().solve(gstack);
  } else {
    for (int j = 0; j < s.n_y; ++j) p.a_rows.push_back(ak_obs.row(s.free_row_indices[j]));
  }
  p.eta = vec_row(bk);
  AssembledModel out = assemble_from_parameters(p, s, model.sigma_e2());
  return out.model;
}

Prediction predict_one_step(const StateSpaceModel& model, const Dataset& data) {
  if (data.n_u() != model.n_u() || data.n_y() != model.n_y())
    throw_invalid("predict", "dataset dimensions do not match the model");
  const Index n = data.samples();
  Prediction out{Matrix(n, model.n_y()), Matrix(n, model.n_y())};
  const Matrix& ak = model.A_K();
  const Matrix& b = model.B();
  const Matrix& k = model.K();
  const Matrix& c = model.C();
  Vector x = Vector::Zero(model.n_x());
  for (Index t = 0; t < n; ++t) {
    Vector yh = c * x;
    out.y_hat.row(t) = yh.transpose();
    Vector yt = data.y().row(t).transpose();
    out.residuals.row(t) = (yt - yh).transpose();
    x = ak * x + k * yt;
    if (model.n_u() > 0) x.noalias() += b * data.u().row(t).transpose();
  }
  return out;
}

}  // namespace wnsf
