#include "wnsf/crlb.hpp"

#include <Eigen/Eigenvalues>

#include <complex>
#include <cmath>

namespace wnsf {

SensitivitySet canonical_sensitivities(const CanonicalStructure& s) {
  SensitivitySet out;
  const Matrix c = s.canonical_c();
  const Matrix zb = Matrix::Zero(s.n_x, s.n_u);
  const Matrix zk = Matrix::Zero(s.n_x, s.n_y);
  for (int q = 0; q < s.a_count(); ++q) {
    out.A_i.push_back(s.a_derivative(q));
    out.B_i.push_back(zb);
    out.K_i.push_back(zk);
  }
  for (int idx = 0; idx < s.eta_count(); ++idx) {
    const int row = idx / s.n_z();
    const int col = idx % s.n_z();
    Matrix b = zb, k = zk;
    if (col < s.n_u)
      b(row, col) = 1.0;
    else
      k(row, col - s.n_u) = 1.0;
    out.A_i.push_back(k * c);
    out.B_i.push_back(b);
    out.K_i.push_back(k);
  }
  out.names = s.parameter_names();
  return out;
}

SensitivitySet armax_sensitivities(int n_x, int n_u) {
  if (n_x < 1 || n_u < 0 || n_u > 1) throw_invalid("crlb", "ARMAX parametrization needs n_x >= 1 and n_u in {0, 1}");
  SensitivitySet out;
  const Matrix zero = Matrix::Zero(n_x, n_x);
  const Matrix zb = Matrix::Zero(n_x, n_u);
  const Matrix zk = Matrix::Zero(n_x, 1);
  // f_i moves k_i = a_i - f_i, so dK = -e_i and dA = dK C.
  for (int i = 0; i < n_x; ++i) {
    Matrix da = zero;
    da(i, 0) = -1.0;
    Matrix dk = zk;
    dk(i, 0) = -1.0;
    out.A_i.push_back(da);
    out.B_i.push_back(zb);
    out.K_i.push_back(dk);
    out.names.push_back("f" + std::to_string(i + 1));
  }
  for (int i = 0; i < n_x && n_u == 1; ++i) {
    Matrix db = zb;
    db(i, 0) = 1.0;
    out.A_i.push_back(zero);
    out.B_i.push_back(db);
    out.K_i.push_back(zk);
    out.names.push_back("l" + std::to_string(i + 1));
  }
  // a_i moves both A_K and K; A itself is unchanged.
  for (int i = 0; i < n_x; ++i) {
    Matrix dk = zk;
    dk(i, 0) = 1.0;
    out.A_i.push_back(zero);
    out.B_i.push_back(zb);
    out.K_i.push_back(dk);
    out.names.push_back("a" + std::to_string(i + 1));
  }
  return out;
}

Matrix canonical_to_armax_jacobian(int n_x, int n_u) {
  if (n_x < 1 || n_u < 0 || n_u > 1) throw_invalid("crlb", "ARMAX parametrization needs n_x >= 1 and n_u in {0, 1}");
  const int nz = n_u + 1;
  const int n_can = n_x + n_x * nz;
  const int n_arm = (2 + n_u) * n_x;
  Matrix t = Matrix::Zero(n_arm, n_can);
  for (int i = 1; i <= n_x; ++i) {
    const int a_idx = n_x - i;
    const int k_idx = n_x + (i - 1) * nz + n_u;
    t(i - 1, a_idx) = 1.0;
    t(i - 1, k_idx) = -1.0;
    if (n_u == 1) t(n_x + i - 1, n_x + (i - 1) * nz) = 1.0;
    t((1 + n_u) * n_x + i - 1, a_idx) = 1.0;
  }
  return t;
}

ArmaxPolynomials armax_from_canonical(const StateSpaceModel& model) {
  if (model.n_y() != 1 || model.n_u() > 1) throw_invalid("crlb", "ARMAX form needs a SISO or output-only model");
  const int n = model.n_x();
  const CanonicalStructure s = CanonicalStructure::make(model.n_u(), {n});
  const ParameterVector p = extract_parameters(model, s);
  ArmaxPolynomials out;
  const int nz = s.n_z();
  for (int i = 1; i <= n; ++i) {
    const double a = p.a_rows[0](n - i);
    const double k = p.eta((i - 1) * nz + model.n_u());
    out.a.push_back(a);
    out.f.push_back(a - k);
    if (model.n_u() == 1) out.l.push_back(p.eta((i - 1) * nz));
  }
  return out;
}

Vector armax_vector(const ArmaxPolynomials& p) {
  Vector v(p.f.size() + p.l.size() + p.a.size());
  Index i = 0;
  for (double x : p.f) v(i++) = x;
  for (double x : p.l) v(i++) = x;
  for (double x : p.a) v(i++) = x;
  return v;
}

RiccatiSolution solve_riccati(const StateSpaceModel& model) {
  const double s2 = model.sigma_e2();
  const int nx = model.n_x();
  const int ny = model.n_y();
  RiccatiSolution out;
  out.P = Matrix::Zero(nx, nx);
  out.gain = model.K();
  out.Q = s2 * Matrix::Identity(ny, ny);
  if (s2 == 0.0) return out;

  const Matrix& a = model.A();
  const Matrix& c = model.C();
  const Matrix r1 = s2 * model.K() * model.K().transpose();
  const Matrix r12 = s2 * model.K();
  const Matrix r2 = s2 * Matrix::Identity(ny, ny);
  Matrix p = Matrix::Zero(nx, nx);
  bool converged = false;
  for (int it = 1; it <= 100000; ++it) {
    const Matrix q = c * p * c.transpose() + r2;
    const Matrix m = a * p * c.transpose() + r12;
    Matrix next = a * p * a.transpose() + r1 - m * q.ldlt().solve(m.transpose());
    next = 0.5 * (next + next.transpose());
    const double change = max_abs_diff(next, p);
    p = std::move(next);
    out.iterations = it;
    if (change < 1e-12) {
      converged = true;
      break;
    }
  }
  if (!converged) throw_numerical("riccati", "no convergence in 1e5 iterations");
  out.P = p;
  out.Q = c * p * c.transpose() + r2;
  out.gain = (a * p * c.transpose() + r12) * out.Q.inverse();
  return out;
}

std::vector<SensitivityCovariance> sensitivity_lyapunov(const StateSpaceModel& model, const SensitivitySet& sens,
                                                        const Matrix& P) {
  const double s2 = model.sigma_e2();
  const Matrix& a = model.A();
  const Matrix& c = model.C();
  const Matrix& k = model.K();
  const Matrix q = c * P * c.transpose() + s2 * Matrix::Identity(model.n_y(), model.n_y());
  const Matrix gain = (a * P * c.transpose() + s2 * k) * q.inverse();
  const Matrix abar = a - gain * c;
  std::vector<SensitivityCovariance> out;
  out.reserve(sens.size());
  for (std::size_t i = 0; i < sens.size(); ++i) {
    const Matrix& da = sens.A_i[i];
    const Matrix& dk = sens.K_i[i];
    const Matrix dr1 = s2 * (dk * k.transpose() + k * dk.transpose());
    const Matrix dr12 = s2 * dk;
    Matrix rhs = da * P * abar.transpose() + abar * P * da.transpose() + dr1 - dr12 * gain.transpose() -
                 gain * dr12.transpose();
    rhs = 0.5 * (rhs + rhs.transpose());
    SensitivityCovariance sc;
    sc.P_i = solve_discrete_lyapunov(abar, rhs);
    sc.Q_i = c * sc.P_i * c.transpose();
    out.push_back(std::move(sc));
  }
  return out;
}

namespace {

struct Shaping {
  StateSpaceFilter filter;  // per channel; empty order means a static gain D
  double variance = 0.0;
};

Shaping shaping_of(const Excitation& ex) {
  Shaping s;
  s.variance = ex.variance;
  switch (ex.kind) {
    case Excitation::Kind::White:
      s.filter = realize(RationalFilter{});
      break;
    case Excitation::Kind::FilteredWhite:
      s.filter = realize(ex.shaping);
      if (spectral_radius(s.filter.A) >= 1.0) throw_invalid("crlb", "shaping filter must be stable");
      break;
    case Excitation::Kind::Multisine:
      throw_invalid("crlb", "the bound needs a stationary stochastic excitation; multisine is not supported");
  }
  return s;
}

}  // namespace

CrlbResult crlb(const StateSpaceModel& model, const SensitivitySet& sens, const ExperimentConfig& experiment) {
  const double s2 = experiment.sigma_e2.value_or(model.sigma_e2());
  if (s2 < 0.0) throw_invalid("crlb", "innovation variance must be non-negative");
  const int nx = model.n_x();
  const int nu = model.n_u();
  const int ny = model.n_y();
  const int np = static_cast<int>(sens.size());
  if (np == 0) throw_invalid("crlb", "no parameters");
  for (int i = 0; i < np; ++i)
    if (sens.A_i[i].rows() != nx || sens.A_i[i].cols() != nx || sens.B_i[i].rows() != nx ||
        sens.B_i[i].cols() != nu || sens.K_i[i].rows() != nx || sens.K_i[i].cols() != ny)
      throw_invalid("crlb", "sensitivity dimensions do not match the model");

  StateSpaceModel m = model;
  m.set_sigma_e2(s2);
  const RiccatiSolution ric = solve_riccati(m);

  // Excitation shaping, one copy of the filter per input channel.
  Matrix as, bs, cs, ds;
  double var_r = 0.0;
  if (nu > 0) {
    const Shaping sh = shaping_of(experiment.excitation);
    const int d = sh.filter.order();
    const Matrix eye = Matrix::Identity(nu, nu);
    as = kron(eye, sh.filter.A);
    bs = kron(eye, sh.filter.B);
    cs = kron(eye, sh.filter.C);
    ds = kron(eye, sh.filter.D);
    if (d == 0) {
      as.resize(0, 0);
      bs.resize(0, nu);
      cs.resize(nu, 0);
    }
    var_r = sh.variance;
  } else {
    as.resize(0, 0);
    bs.resize(0, 0);
    cs.resize(0, 0);
    ds.resize(0, 0);
  }

  // Controller f = C_c x_c + D_c y.
  Matrix ac(0, 0), bc(0, ny), cc(nu, 0), dc = Matrix::Zero(nu, ny);
  switch (experiment.loop.kind) {
    case LoopConfig::Kind::Open:
      break;
    case LoopConfig::Kind::StaticGain:
      if (experiment.loop.gain.rows() != nu || experiment.loop.gain.cols() != ny)
        throw_invalid("crlb", "static controller gain must be n_u x n_y");
      dc = experiment.loop.gain;
      break;
    case LoopConfig::Kind::Rational: {
      if (nu != 1 || ny != 1) throw_invalid("crlb", "rational controllers are SISO only");
      const StateSpaceFilter f = realize(experiment.loop.filter);
      ac = f.A;
      bc = f.B;
      cc = f.C;
      dc = f.D;
      break;
    }
  }

  const int ns = static_cast<int>(as.rows());
  const int nc = static_cast<int>(ac.rows());
  const int base = nx + ns + nc;
  const int dim = base + np * nx;
  const int nw = nu + ny;

  // u = Ux x + Us x_s + Uc x_c + Uw w + Ue e
  const Matrix ux = -dc * m.C();
  const Matrix& us = cs;
  const Matrix uc = -cc;
  const Matrix& uw = ds;
  const Matrix ue = -dc;

  Matrix abar = Matrix::Zero(dim, dim);
  Matrix bbar = Matrix::Zero(dim, nw);
  const Matrix& a = m.A();
  const Matrix& b = m.B();
  const Matrix& c = m.C();
  const Matrix& k = ric.gain;
  const Matrix ak = a - k * c;

  abar.block(0, 0, nx, nx) = a + b * ux;
  if (ns > 0) abar.block(0, nx, nx, ns) = b * us;
  if (nc > 0) abar.block(0, nx + ns, nx, nc) = b * uc;
  if (nu > 0) bbar.block(0, 0, nx, nu) = b * uw;
  bbar.block(0, nu, nx, ny) = b * ue + k;

  if (ns > 0) {
    abar.block(nx, nx, ns, ns) = as;
    bbar.block(nx, 0, ns, nu) = bs;
  }
  if (nc > 0) {
    abar.block(nx + ns, 0, nc, nx) = bc * c;
    abar.block(nx + ns, nx + ns, nc, nc) = ac;
    bbar.block(nx + ns, nu, nc, ny) = bc;
  }
  for (int i = 0; i < np; ++i) {
    const int r0 = base + i * nx;
    const Matrix& bi = sens.B_i[i];
    const Matrix& ki = sens.K_i[i];
    const Matrix aki = sens.A_i[i] - ki * c;
    abar.block(r0, 0, nx, nx) = aki + ki * c + (nu > 0 ? Matrix(bi * ux) : Matrix::Zero(nx, nx));
    if (ns > 0) abar.block(r0, nx, nx, ns) = bi * us;
    if (nc > 0) abar.block(r0, nx + ns, nx, nc) = bi * uc;
    abar.block(r0, r0, nx, nx) = ak;
    if (nu > 0) bbar.block(r0, 0, nx, nu) = bi * uw;
    bbar.block(r0, nu, nx, ny) = ki + (nu > 0 ? Matrix(bi * ue) : Matrix::Zero(nx, ny));
  }

  if (spectral_radius(abar) >= 1.0 - 1e-12)
    throw_numerical("crlb", "closed loop or predictor is not stable; the bound is undefined");

  Vector v(nw);
  for (int i = 0; i < nu; ++i) v(i) = var_r;
  for (int i = 0; i < ny; ++i) v(nu + i) = s2;
  const Matrix pbar = solve_discrete_lyapunov(abar, bbar * v.asDiagonal() * bbar.transpose());

  CrlbResult out;
  out.names = sens.names;
  out.M.resize(np, np);
  for (int i = 0; i < np; ++i)
    for (int j = 0; j <= i; ++j) {
      const double mij = (c * pbar.block(base + i * nx, base + j * nx, nx, nx) * c.transpose()).trace();
      out.M(i, j) = mij;
      out.M(j, i) = mij;
    }

  Eigen::SelfAdjointEigenSolver<Matrix> eig(out.M);
  const double lmax = eig.eigenvalues().cwiseAbs().maxCoeff();
  out.min_eigenvalue = eig.eigenvalues()(0);
  out.singular = !(lmax > 0.0) || out.min_eigenvalue <= 1e-12 * lmax;
  if (!out.singular) out.covariance = s2 * out.M.ldlt().solve(Matrix::Identity(np, np));
  return out;
}

CrlbResult crlb(const StateSpaceModel& model, const CanonicalStructure& structure,
                const ExperimentConfig& experiment) {
  if (model.n_x() != structure.n_x || model.n_y() != structure.n_y || model.n_u() != structure.n_u)
    throw_invalid("crlb", "model and structure dimensions differ");
  return crlb(model, canonical_sensitivities(structure), experiment);
}

namespace {

using Complex = std::complex<double>;

// c0 + c[0] z^-1 + c[1] z^-2 + ...
Complex poly(double c0, const std::vector<double>& c, Complex zi) {
  Complex acc = 0.0, p = zi;
  for (double x : c) {
    acc += x * p;
    p *= zi;
  }
  return c0 + acc;
}

Complex ratio(const RationalFilter& f, Complex zi) {
  Complex num = 0.0, den = 0.0, p = 1.0;
  const std::size_t n = std::max(f.num.size(), f.den.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i < f.num.size()) num += f.num[i] * p;
    if (i < f.den.size()) den += f.den[i] * p;
    p *= zi;
  }
  return num / den;
}

double root_radius(const std::vector<double>& monic_tail) {
  const int n = static_cast<int>(monic_tail.size());
  if (n == 0) return 0.0;
  Matrix comp = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    comp(i, 0) = -monic_tail[i];
    if (i + 1 < n) comp(i, i + 1) = 1.0;
  }
  return spectral_radius(comp);
}

}  // namespace

Matrix frequency_crlb_siso(const ArmaxPolynomials& p, double sigma_e2, const ExperimentConfig& experiment,
                           int grid_points) {
  const int n = static_cast<int>(p.f.size());
  const bool input = !p.l.empty();
  if (n == 0 || static_cast<int>(p.a.size()) != n || (input && static_cast<int>(p.l.size()) != n))
    throw_invalid("crlb", "F, L and A must share one order");
  if (grid_points < 16) throw_invalid("crlb", "too few quadrature points");
  if (root_radius(p.a) >= 1.0) throw_numerical("crlb", "A(q) has roots outside the open unit disk");

  double var_r = 0.0;
  RationalFilter shaping;
  if (input) {
    switch (experiment.excitation.kind) {
      case Excitation::Kind::White:
        break;
      case Excitation::Kind::FilteredWhite:
        shaping = experiment.excitation.shaping;
        break;
      case Excitation::Kind::Multisine:
        throw_invalid("crlb", "the bound needs a stationary stochastic excitation; multisine is not supported");
    }
    var_r = experiment.excitation.variance;
  }

  const int np = (input ? 3 : 2) * n;
  Matrix acc = Matrix::Zero(np, np);
  Eigen::VectorXcd phi_r(np), phi_e(np);
  for (int kk = 0; kk < grid_points; ++kk) {
    const double w = -M_PI + 2.0 * M_PI * kk / grid_points;
    const Complex zi = std::polar(1.0, -w);
    const Complex F = poly(1.0, p.f, zi);
    const Complex A = poly(1.0, p.a, zi);
    const Complex L = input ? poly(0.0, p.l, zi) : Complex(0.0);
    Complex ky = 0.0;
    if (input) {
      switch (experiment.loop.kind) {
        case LoopConfig::Kind::Open:
          break;
        case LoopConfig::Kind::StaticGain:
          ky = experiment.loop.gain(0, 0);
          break;
        case LoopConfig::Kind::Rational:
          ky = ratio(experiment.loop.filter, zi);
          break;
      }
    }
    if (std::abs(F) < 1e-12) throw_numerical("crlb", "F(q) vanishes on the unit circle");
    const Complex G = L / F;
    const Complex H = A / F;
    const Complex one_plus = 1.0 + ky * G;
    if (std::abs(one_plus) < 1e-12) throw_numerical("crlb", "closed loop has a pole on the unit circle");
    const Complex S = 1.0 / one_plus;
    const double psi_r = input ? var_r * std::norm(ratio(shaping, zi)) : 0.0;

    Complex v = zi;
    for (int i = 0; i < n; ++i) {
      phi_r(i) = -v * G * S / A;
      phi_e(i) = -v * S * H / A;
      if (input) {
        phi_r(n + i) = v * S / A;
        phi_e(n + i) = -v * ky * S * H / A;
      }
      const int ai = (input ? 2 : 1) * n + i;
      phi_r(ai) = 0.0;
      phi_e(ai) = v / A;
      v *= zi;
    }
    acc.noalias() += psi_r * (phi_r * phi_r.adjoint()).real() + sigma_e2 * (phi_e * phi_e.adjoint()).real();
  }
  acc /= grid_points;
  return 0.5 * (acc + acc.transpose());
}

}  // namespace wnsf
