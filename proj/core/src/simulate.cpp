#include "wnsf/simulate.hpp"

#include "wnsf/rng.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <complex>
#include <sstream>

namespace wnsf {

StateSpaceFilter realize(const RationalFilter& f) {
  if (f.den.empty() || f.den[0] == 0.0) throw_invalid("filter", "leading denominator coefficient must be nonzero");
  if (f.num.empty()) throw_invalid("filter", "numerator is empty");
  const double a0 = f.den[0];
  const int d = static_cast<int>(std::max(f.num.size(), f.den.size())) - 1;
  auto a = [&](int i) { return i < static_cast<int>(f.den.size()) ? f.den[i] / a0 : 0.0; };
  auto b = [&](int i) { return i < static_cast<int>(f.num.size()) ? f.num[i] / a0 : 0.0; };
  StateSpaceFilter s;
  s.A = Matrix::Zero(d, d);
  s.B = Matrix::Zero(d, 1);
  s.C = Matrix::Zero(1, d);
  s.D = Matrix::Constant(1, 1, b(0));
  for (int i = 0; i < d; ++i) {
    s.A(i, 0) = -a(i + 1);
    if (i + 1 < d) s.A(i, i + 1) = 1.0;
    s.B(i, 0) = b(i + 1) - a(i + 1) * b(0);
  }
  if (d > 0) s.C(0, 0) = 1.0;
  return s;
}

namespace {

constexpr double kDivergence = 1e12;

}  // namespace

SimulationTrace simulate_sequences(const StateSpaceModel& model, const Matrix& r, const Matrix& e,
                                   const LoopConfig& loop) {
  const Index n = e.rows();
  const int nu = model.n_u();
  const int ny = model.n_y();
  if (r.rows() != n || r.cols() != nu || e.cols() != ny) throw_invalid("simulate", "sequence dimensions do not match");

  StateSpaceFilter ctrl;
  bool dynamic = false;
  Matrix static_gain = Matrix::Zero(nu, ny);
  switch (loop.kind) {
    case LoopConfig::Kind::Open:
      break;
    case LoopConfig::Kind::StaticGain:
      if (loop.gain.rows() != nu || loop.gain.cols() != ny)
        throw_invalid("simulate", "static controller gain must be n_u x n_y");
      static_gain = loop.gain;
      break;
    case LoopConfig::Kind::Rational:
      if (nu != 1 || ny != 1) throw_invalid("simulate", "rational controllers are SISO only");
      ctrl = realize(loop.filter);
      dynamic = true;
      break;
  }

  Matrix u(n, nu), y(n, ny);
  Vector x = Vector::Zero(model.n_x());
  Vector xc = Vector::Zero(dynamic ? ctrl.order() : 0);
  for (Index k = 0; k < n; ++k) {
    Vector ek = e.row(k).transpose();
    Vector yk = model.C() * x + ek;
    Vector fk;
    if (dynamic) {
      fk = ctrl.C * xc + ctrl.D * yk;
      xc = ctrl.A * xc + ctrl.B * yk;
    } else {
      fk = static_gain * yk;
    }
    Vector uk = r.row(k).transpose() - fk;
    x = model.A() * x + model.K() * ek;
    if (nu > 0) x.noalias() += model.B() * uk;
    u.row(k) = uk.transpose();
    y.row(k) = yk.transpose();
    if (!(x.norm() < kDivergence)) {
      std::ostringstream os;
      os << "state norm exceeded 1e12 at sample " << k << "; the loop is unstable";
      throw_numerical("simulate", os.str());
    }
  }
  const LoopKind kind = loop.kind == LoopConfig::Kind::Open ? LoopKind::Open : LoopKind::Closed;
  return SimulationTrace{Dataset(std::move(u), std::move(y), kind), r, e};
}

Matrix generate_excitation(const Excitation& ex, int n_u, Index samples, std::uint64_t seed, std::uint64_t trial) {
  Matrix r = Matrix::Zero(samples, n_u);
  if (n_u == 0) return r;
  if (ex.variance < 0.0 || ex.dither_variance < 0.0) throw_invalid("excitation", "variances must be non-negative");
  Philox rng(seed, stream_id(trial, StreamPurpose::Excitation));
  switch (ex.kind) {
    case Excitation::Kind::White: {
      const double sd = std::sqrt(ex.variance);
      for (Index k = 0; k < samples; ++k)
        for (int c = 0; c < n_u; ++c) r(k, c) = sd * rng.normal();
      break;
    }
    case Excitation::Kind::FilteredWhite: {
      const StateSpaceFilter f = realize(ex.shaping);
      if (spectral_radius(f.A) >= 1.0) throw_invalid("excitation", "shaping filter must be stable");
      const double sd = std::sqrt(ex.variance);
      Matrix xs = Matrix::Zero(f.order(), n_u);
      for (Index k = 0; k < samples; ++k)
        for (int c = 0; c < n_u; ++c) {
          const double w = sd * rng.normal();
          r(k, c) = (f.C * xs.col(c))(0) + f.D(0, 0) * w;
          xs.col(c) = f.A * xs.col(c) + f.B * w;
        }
      break;
    }
    case Excitation::Kind::Multisine: {
      if (static_cast<int>(ex.tones.size()) != n_u) throw_invalid("excitation", "need one tone list per input");
      Philox dither(seed, stream_id(trial, StreamPurpose::Dither));
      const double sd = std::sqrt(ex.dither_variance);
      for (Index k = 0; k < samples; ++k)
        for (int c = 0; c < n_u; ++c) {
          double v = 0.0;
          // Sample index starts at 1.
          for (const Tone& t : ex.tones[c]) v += t.amplitude * std::sin(t.frequency * static_cast<double>(k + 1) + t.phase);
          r(k, c) = v + sd * dither.normal();
        }
      break;
    }
  }
  return r;
}

SimulationTrace simulate_trace(const StateSpaceModel& model, const ExperimentConfig& cfg, std::uint64_t trial) {
  if (cfg.samples <= 0) throw_invalid("simulate", "sample count must be positive");
  if (cfg.burn_in < 0) throw_invalid("simulate", "burn-in must be non-negative");
  const double s2 = cfg.sigma_e2.value_or(model.sigma_e2());
  if (s2 < 0.0) throw_invalid("simulate", "innovation variance must be non-negative");
  const Index total = cfg.samples + cfg.burn_in;
  Matrix r = generate_excitation(cfg.excitation, model.n_u(), total, cfg.seed, trial);
  Matrix e(total, model.n_y());
  Philox rng(cfg.seed, stream_id(trial, StreamPurpose::Innovation));
  const double sd = std::sqrt(s2);
  for (Index k = 0; k < total; ++k)
    for (int c = 0; c < model.n_y(); ++c) e(k, c) = sd * rng.normal();
  SimulationTrace t = simulate_sequences(model, r, e, cfg.loop);
  if (cfg.burn_in == 0) return t;
  return SimulationTrace{t.data.slice(cfg.burn_in, cfg.samples), t.r.bottomRows(cfg.samples),
                         t.e.bottomRows(cfg.samples)};
}

Dataset simulate(const StateSpaceModel& model, const ExperimentConfig& cfg, std::uint64_t trial) {
  return simulate_trace(model, cfg, trial).data;
}

double h2_norm(const Matrix& A, const Matrix& B, const Matrix& C) {
  if (B.cols() == 0) return 0.0;
  Matrix p = solve_discrete_lyapunov(A, B * B.transpose());
  return std::sqrt(std::max(0.0, (C * p * C.transpose()).trace()));
}

namespace {

Matrix gaussian(Philox& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

// PBH test: min over eigenvalues l of sigma_min([A - l I, B]) relative to the scale of (A, B).
// Krylov matrices lose rank numerically for large n even when the pair is minimal.
double pbh_margin(const Matrix& a, const Matrix& b) {
  using CMatrix = Eigen::MatrixXcd;
  const Index n = a.rows();
  const double scale = std::max(a.norm(), b.norm());
  if (scale == 0.0) return 0.0;
  const Eigen::VectorXcd eig = Eigen::EigenSolver<Matrix>(a, false).eigenvalues();
  double margin = INFINITY;
  CMatrix m(n, n + b.cols());
  for (Index i = 0; i < n; ++i) {
    m.leftCols(n) = a.cast<std::complex<double>>() - eig(i) * CMatrix::Identity(n, n);
    m.rightCols(b.cols()) = b.cast<std::complex<double>>();
    margin = std::min(margin, Eigen::JacobiSVD<CMatrix>(m).singularValues()(n - 1) / scale);
  }
  return margin;
}

std::optional<StateSpaceModel> draw_system(Philox& rng, int nx, int nu, int ny, const RandomSystemConstraints& c) {
  Matrix a = gaussian(rng, nx, nx);
  const double rho = spectral_radius(a);
  if (rho < 1e-8) return std::nullopt;
  const double target = 0.3 + (c.max_pole - 0.3) * rng.uniform();
  a *= target / rho;
  Matrix b = gaussian(rng, nx, nu);
  Matrix cm = gaussian(rng, ny, nx);
  Matrix k = 0.5 * gaussian(rng, nx, ny);
  for (int halvings = 0; spectral_radius(a - k * cm) > c.max_pole; ++halvings) {
    if (halvings > 60) return std::nullopt;
    k *= 0.5;
  }
  if (nu > 0) {
    const double h2 = h2_norm(a, b, cm);
    if (h2 < 1e-8) return std::nullopt;
    const double span = c.h2_max - c.h2_min;
    const double goal = c.h2_min + span * (0.1 + 0.8 * rng.uniform());
    b *= goal / h2;
  }
  // Minimality of the predictor: observable (A_K, C) and controllable (A_K, [B K]).
  const Matrix ak = a - k * cm;
  Matrix bk(nx, nu + ny);
  bk << b, k;
  if (pbh_margin(ak, bk) < 1e-6 || pbh_margin(ak.transpose(), cm.transpose()) < 1e-6) return std::nullopt;
  return StateSpaceModel(a, b, cm, k, c.sigma_e2);
}

void check_constraints(int nx, int nu, int ny, const RandomSystemConstraints& c) {
  if (nx < 1 || ny < 1 || nu < 0) throw_invalid("randsys", "dimensions must be positive");
  if (!(c.max_pole > 0.3 && c.max_pole < 1.0)) throw_invalid("randsys", "pole cap must lie in (0.3, 1)");
  if (!(c.h2_min >= 0.0 && c.h2_max > c.h2_min)) throw_invalid("randsys", "empty H2 window");
  if (c.max_tries < 1) throw_invalid("randsys", "max_tries must be positive");
}

}  // namespace

StateSpaceModel random_system(int n_x, int n_u, int n_y, std::uint64_t seed, const RandomSystemConstraints& c) {
  check_constraints(n_x, n_u, n_y, c);
  Philox rng(seed, stream_id(0, StreamPurpose::System));
  for (int attempt = 0; attempt < c.max_tries; ++attempt)
    if (auto m = draw_system(rng, n_x, n_u, n_y, c)) return *m;
  throw_numerical("randsys", "no system satisfied the constraints after " + std::to_string(c.max_tries) + " draws");
}

StateSpaceModel random_canonical_system(const CanonicalStructure& s, std::uint64_t seed,
                                        const RandomSystemConstraints& c) {
  check_constraints(s.n_x, s.n_u, s.n_y, c);
  Philox rng(seed, stream_id(0, StreamPurpose::System));
  for (int attempt = 0; attempt < c.max_tries; ++attempt) {
    auto m = draw_system(rng, s.n_x, s.n_u, s.n_y, c);
    if (!m) continue;
    try {
      StateSpaceModel canon = to_canonical(*m, s);
      const double scale = std::max(canon.A_K().cwiseAbs().maxCoeff(), canon.B_K().cwiseAbs().maxCoeff());
      if (scale < 1e3 && canon.predictor_stable()) return canon;
    } catch (const Error&) {
    }
  }
  throw_numerical("randsys", "no well-conditioned canonical system found");
}

}  // namespace wnsf
