#include <doctest.h>

#include "systems.hpp"
#include "wnsf/baseline.hpp"
#include "wnsf/hoarx.hpp"
#include "wnsf/metrics.hpp"
#include "wnsf/rng.hpp"
#include "wnsf/simulate.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <complex>
#include <numbers>

using namespace wnsf;

namespace {

// Riemann sum of |G(e^{jw})|_F^2 on a uniform grid, exact for trigonometric polynomials
// and spectrally accurate for stable rational G.
double h2_by_quadrature(const Matrix& A, const Matrix& B, const Matrix& C, int points) {
  using Complex = std::complex<double>;
  using CMatrix = Eigen::MatrixXcd;
  const Index n = A.rows();
  double sum = 0.0;
  for (int i = 0; i < points; ++i) {
    const double w = 2.0 * std::numbers::pi * i / points;
    CMatrix zi = std::exp(Complex(0.0, w)) * CMatrix::Identity(n, n) - A.cast<Complex>();
    const CMatrix g = C.cast<Complex>() * zi.partialPivLu().solve(B.cast<Complex>());
    sum += g.squaredNorm();
  }
  return std::sqrt(sum / points);
}

double max_markov_gap(const StateSpaceModel& a, const StateSpaceModel& b, int n) {
  const auto ga = markov_parameters(a, n);
  const auto gb = markov_parameters(b, n);
  double gap = 0.0;
  for (int i = 0; i < n; ++i) gap = std::max(gap, max_abs_diff(ga[i], gb[i]));
  return gap;
}

}  // namespace

TEST_SUITE("simulate") {
  TEST_CASE("same seed gives bit-identical data, other trials differ") {
    const auto cfg = testsys::white(500, 42);
    const auto a = simulate(testsys::siso(), cfg, 3);
    const auto b = simulate(testsys::siso(), cfg, 3);
    const auto c = simulate(testsys::siso(), cfg, 4);
    CHECK(a.u() == b.u());
    CHECK(a.y() == b.y());
    CHECK(a.y() != c.y());
  }

  TEST_CASE("noise-free impulse gives the input impulse response") {
    const auto m = testsys::siso();
    const Index n = 30;
    Matrix r = Matrix::Zero(n, 1);
    r(0, 0) = 1.0;
    const auto t = simulate_sequences(m, r, Matrix::Zero(n, 1), LoopConfig{});
    const auto g = impulse_response(m, static_cast<int>(n) - 1);
    CHECK(t.data.y()(0, 0) == 0.0);
    for (Index k = 1; k < n; ++k) CHECK(std::abs(t.data.y()(k, 0) - g[k - 1](0, 0)) < 1e-14);
  }

  TEST_CASE("static feedback satisfies u + F y = r sample by sample") {
    auto cfg = testsys::white(2000, 5);
    cfg.loop.kind = LoopConfig::Kind::StaticGain;
    cfg.loop.gain = (Matrix(2, 2) << 0.1, -0.05, 0.02, 0.08).finished();
    const auto t = simulate_trace(testsys::mimo(), cfg);
    const Matrix lhs = t.data.u() + t.data.y() * cfg.loop.gain.transpose();
    CHECK(max_abs_diff(lhs, t.r) < 1e-10);
    CHECK(t.data.loop() == LoopKind::Closed);
  }

  TEST_CASE("rational feedback matches a direct difference-equation recursion") {
    auto cfg = testsys::white(300, 9);
    cfg.loop.kind = LoopConfig::Kind::Rational;
    cfg.loop.filter = RationalFilter{{0.3, -0.1}, {1.0, -0.5}};
    const auto t = simulate_trace(testsys::siso(), cfg);
    // F(q) y = w with w_k = 0.5 w_{k-1} + 0.3 y_k - 0.1 y_{k-1}
    double w_prev = 0.0, y_prev = 0.0, worst = 0.0;
    for (Index k = 0; k < 300; ++k) {
      const double y = t.data.y()(k, 0);
      const double w = 0.5 * w_prev + 0.3 * y - 0.1 * y_prev;
      worst = std::max(worst, std::abs(t.data.u()(k, 0) + w - t.r(k, 0)));
      w_prev = w;
      y_prev = y;
    }
    CHECK(worst < 1e-12);
  }

  TEST_CASE("unstable closed loop is reported") {
    auto cfg = testsys::white(5000, 1);
    cfg.loop.kind = LoopConfig::Kind::StaticGain;
    cfg.loop.gain = Matrix::Constant(1, 1, -40.0);
    CHECK_THROWS_AS(simulate(testsys::siso(), cfg), Error);
  }

  TEST_CASE("two-tone multisine with dither has the theoretical variance") {
    ExperimentConfig cfg;
    cfg.samples = 4000;
    cfg.seed = 11;
    cfg.excitation.kind = Excitation::Kind::Multisine;
    const double pi = std::numbers::pi;
    cfg.excitation.tones = {{{4 * pi / 10, 1.0, 0.0}, {11 * pi / 20, 1.0, 0.0}},
                            {{9 * pi / 20, 1.0, 0.0}, {6 * pi / 10, 1.0, 0.0}}};
    cfg.excitation.dither_variance = 8e-8;
    const Matrix r = generate_excitation(cfg.excitation, 2, cfg.samples, cfg.seed);
    const double theory = 1.0 + 8e-8;
    for (int c = 0; c < 2; ++c) {
      const double mean = r.col(c).mean();
      const double var = (r.col(c).array() - mean).square().sum() / static_cast<double>(r.rows() - 1);
      CHECK(std::abs(var / theory - 1.0) < 0.05);
    }
  }

  TEST_CASE("filtered white excitation follows the shaping filter") {
    Excitation ex;
    ex.kind = Excitation::Kind::FilteredWhite;
    ex.shaping = RationalFilter{{1.0}, {1.0, -0.8}};
    const Matrix r = generate_excitation(ex, 1, 200000, 3);
    const double var = r.col(0).squaredNorm() / static_cast<double>(r.rows());
    CHECK(std::abs(var / (1.0 / (1.0 - 0.64)) - 1.0) < 0.05);
  }

  TEST_CASE("true predictor residuals have the innovation variance") {
    auto cfg = testsys::white(100000, 17);
    cfg.sigma_e2 = 0.3;
    const auto m = testsys::siso();
    const auto data = simulate(m, cfg);
    const auto p = predict_one_step(m, data);
    const double var = p.residuals.squaredNorm() / static_cast<double>(p.residuals.rows());
    CHECK(std::abs(var / 0.3 - 1.0) < 0.05);
  }

  TEST_CASE("burn-in drops the leading samples of the same run") {
    auto cfg = testsys::white(100, 2);
    auto longer = cfg;
    longer.samples = 130;
    cfg.burn_in = 30;
    const auto a = simulate(testsys::siso(), cfg);
    const auto b = simulate(testsys::siso(), longer);
    CHECK(a.samples() == 100);
    CHECK(a.y() == b.y().bottomRows(100));
  }

  TEST_CASE("random systems respect the pole cap and the H2 window") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const int nx = 2 + static_cast<int>(seed % 5);
      const int ny = 1 + static_cast<int>(seed % 2);
      const auto m = random_system(nx, 1, ny, seed);
      CHECK(spectral_radius(m.A()) <= 0.97 + 1e-9);
      CHECK(m.predictor_stable());
      const double h2 = h2_norm(m.A(), m.B(), m.C());
      CHECK(h2 > 2.0);
      CHECK(h2 < 4.0);
    }
  }

  TEST_CASE("random systems are deterministic in the seed") {
    const auto a = random_system(5, 2, 2, 99);
    const auto b = random_system(5, 2, 2, 99);
    const auto c = random_system(5, 2, 2, 100);
    CHECK(a.A() == b.A());
    CHECK(a.K() == b.K());
    CHECK(a.A() != c.A());
  }

  TEST_CASE("Lyapunov H2 norm agrees with frequency-grid quadrature") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto m = random_system(4, 2, 2, seed);
      const double lyap = h2_norm(m.A(), m.B(), m.C());
      const double quad = h2_by_quadrature(m.A(), m.B(), m.C(), 1 << 13);
      CHECK(std::abs(lyap - quad) < 1e-6 * lyap);
    }
  }

  TEST_CASE("infeasible constraints are rejected") {
    RandomSystemConstraints c;
    c.h2_min = 4.0;
    c.h2_max = 2.0;
    CHECK_THROWS_AS(random_system(3, 1, 1, 1, c), Error);
    c = {};
    c.max_pole = 1.2;
    CHECK_THROWS_AS(random_system(3, 1, 1, 1, c), Error);
  }
}

TEST_SUITE("baseline") {
  TEST_CASE("exact Markov parameters are realized to 1e-8") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const int nx = 2 + static_cast<int>(seed % 4);
      const int nu = 1 + static_cast<int>(seed % 2);
      const int ny = 1 + static_cast<int>((seed / 2) % 2);
      const auto truth = random_system(nx, nu, ny, seed);
      const int order = 60;
      const auto markov = MarkovEstimate::from_exact(markov_parameters(truth, order), nu);
      const auto result = ho_kalman(markov, nx);
      CHECK_MESSAGE(max_markov_gap(result.model, truth, 50) < 1e-8, "seed " << seed);
      CHECK(!result.ambiguous_order);
    }
  }

  TEST_CASE("scalar geometric sequence gives the pole") {
    std::vector<Matrix> g;
    for (int i = 0; i < 20; ++i) g.push_back(Matrix::Constant(1, 1, 0.7 * std::pow(-0.6, i)));
    const auto result = ho_kalman(MarkovEstimate::from_exact(g, 0), 1);
    CHECK(std::abs(result.model.A_K()(0, 0) + 0.6) < 1e-12);
    CHECK(result.singular_values.size() >= 2);
    CHECK(result.singular_values(1) < 1e-12);
  }

  TEST_CASE("weightings do not change the realized impulse response on exact data") {
    const auto truth = random_system(4, 1, 2, 21);
    const auto markov = MarkovEstimate::from_exact(markov_parameters(truth, 40), 1);
    const int f = 10, p = 12;
    Philox rng(5, 0);
    auto spd = [&](Index n) {
      Matrix x(n, n);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) x(i, j) = rng.normal();
      return Matrix(x * x.transpose() + static_cast<double>(n) * Matrix::Identity(n, n));
    };
    const auto plain = ho_kalman(markov, 4, f, p);
    const auto weighted = ho_kalman(markov, 4, f, p, spd(f * 2), spd(p * 3));
    CHECK(max_markov_gap(plain.model, weighted.model, 50) < 1e-8);
    CHECK(max_markov_gap(plain.model, truth, 50) < 1e-8);
  }

  TEST_CASE("overstated order is flagged as ambiguous") {
    // Beyond the true order only estimation noise remains in the spectrum.
    const auto markov = estimate_hoarx(simulate(testsys::siso(), testsys::white(2000, 4)), 30);
    const auto result = ho_kalman(markov, 4);
    CHECK(result.ambiguous_order);
    CHECK(!result.warnings.empty());
  }

  TEST_CASE("horizon and weighting preconditions") {
    const auto markov = MarkovEstimate::from_exact(markov_parameters(testsys::siso(), 20), 1);
    CHECK_THROWS_AS(ho_kalman(markov, 2, 15, 10), Error);
    CHECK_THROWS_AS(ho_kalman(markov, 2, 1, 5), Error);
    CHECK_THROWS_AS(ho_kalman(markov, 2, 5, 5, Matrix::Zero(5, 5)), Error);
  }
}

TEST_SUITE("metrics") {
  TEST_CASE("four-sample hand example") {
    Matrix y(4, 1), yh(4, 1);
    y << 1, 2, 3, 4;
    yh << 1, 2, 2, 4;
    const auto e = id_val_errors(y, yh, 0.5);
    CHECK(e.split_index == 2);
    CHECK(e.identification == 0.0);
    CHECK(e.validation == std::sqrt(2.0));
  }

  TEST_CASE("perfect and segment-mean predictions") {
    Matrix y(10, 2);
    for (Index k = 0; k < 10; ++k) y.row(k) << std::sin(0.7 * k), std::cos(1.3 * k) + 0.1 * k;
    const auto exact = id_val_errors(y, y);
    CHECK(exact.identification == 0.0);
    CHECK(exact.validation == 0.0);
    Matrix means(10, 2);
    const Index split = 7;
    means.topRows(split).rowwise() = y.topRows(split).colwise().mean();
    means.bottomRows(10 - split).rowwise() = y.bottomRows(10 - split).colwise().mean();
    const auto flat = id_val_errors(y, means);
    CHECK(std::abs(flat.identification - 1.0) < 1e-14);
    CHECK(std::abs(flat.validation - 1.0) < 1e-14);
  }

  TEST_CASE("constant segment is an error") {
    Matrix y = Matrix::Ones(4, 1);
    CHECK_THROWS_AS(id_val_errors(y, y, 0.5), Error);
  }

  TEST_CASE("FIT identities") {
    const auto m = testsys::siso();
    CHECK(fit_impulse(m, m, 100) == doctest::Approx(100.0).epsilon(1e-14));
    const auto g = impulse_response(m, 100);
    double mean = 0.0;
    for (const auto& gi : g) mean += gi(0, 0);
    mean /= static_cast<double>(g.size());
    std::vector<Matrix> flat(g.size(), Matrix::Constant(1, 1, mean));
    CHECK(std::abs(fit_percent(g, flat)) < 1e-12);
    std::vector<Matrix> constant(5, Matrix::Ones(1, 1));
    CHECK_THROWS_AS(fit_percent(constant, constant), Error);
  }

  TEST_CASE("FIT is invariant under similarity transforms") {
    const auto m = testsys::mimo();
    Matrix t(4, 4);
    t << 1, 0.3, 0, -0.2, 0.1, 2, 0.5, 0, 0, -0.4, 1, 0.7, 0.2, 0, 0.3, 1.5;
    const Matrix ti = t.inverse();
    const StateSpaceModel moved(t * m.A() * ti, t * m.B(), m.C() * ti, t * m.K(), m.sigma_e2());
    CHECK(std::abs(fit_impulse(m, moved, 200) - 100.0) < 1e-9);
    CHECK(std::abs(fit_impulse_noise(m, moved, 200) - 100.0) < 1e-9);
  }

  TEST_CASE("FIT settles once the horizon covers the impulse energy") {
    const auto truth = testsys::siso();
    const auto est = StateSpaceModel(truth.A(), 1.001 * truth.B(), truth.C(), truth.K(), 1.0);
    const auto g = impulse_response(truth, 2000);
    double total = 0.0, covered = 0.0;
    for (const auto& gi : g) total += gi.squaredNorm();
    int h = 0;
    while (covered < 0.999 * total) covered += g[h++].squaredNorm();
    const double near = fit_impulse(truth, est, h);
    CHECK(std::abs(near - fit_impulse(truth, est, 8 * h)) < 0.01);
    CHECK(near < 100.0);
  }

  TEST_CASE("estimates equal to the truth give zero ratios") {
    const Vector truth = (Vector(2) << 1.0, -2.0).finished();
    const Matrix est = truth.transpose().replicate(5, 1);
    const auto r = mse_vs_crlb(est, truth, Matrix::Identity(2, 2), 1.0, 100);
    CHECK(r.ratio.isZero());
  }

  TEST_CASE("Gaussian estimates with the bound covariance give ratios near one") {
    const Matrix m = (Matrix(3, 3) << 2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5).finished();
    const double s2 = 0.7;
    const Index n = 1000;
    const int trials = 4000;
    const Matrix cov = s2 * m.inverse() / static_cast<double>(n);
    const Matrix l = cov.llt().matrixL();
    const Vector truth = (Vector(3) << 0.5, -1.0, 2.0).finished();
    Philox rng(8, 1);
    Matrix est(trials, 3);
    for (int t = 0; t < trials; ++t) {
      Vector z(3);
      for (int i = 0; i < 3; ++i) z(i) = rng.normal();
      est.row(t) = (truth + l * z).transpose();
    }
    const auto r = mse_vs_crlb(est, truth, m, s2, n);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(r.ratio(i) - 1.0) < 3.0 / std::sqrt(double(trials)));
  }

  TEST_CASE("ratios scale linearly with N") {
    const Vector truth = Vector::Zero(2);
    const Matrix est = (Matrix(3, 2) << 0.1, -0.2, 0.05, 0.1, -0.1, 0.0).finished();
    const Matrix m = Matrix::Identity(2, 2);
    const auto a = mse_vs_crlb(est, truth, m, 1.0, 500);
    const auto b = mse_vs_crlb(est, truth, m, 1.0, 1000);
    CHECK(max_abs_diff(b.ratio, 2.0 * a.ratio) < 1e-14);
  }

  TEST_CASE("singular information and single trials are rejected") {
    const Vector truth = Vector::Zero(2);
    const Matrix est = Matrix::Zero(3, 2);
    CHECK_THROWS_AS(mse_vs_crlb(est, truth, Matrix::Zero(2, 2), 1.0, 10), Error);
    CHECK_THROWS_AS(mse_vs_crlb(Matrix::Zero(1, 2), truth, Matrix::Identity(2, 2), 1.0, 10), Error);
  }
}
