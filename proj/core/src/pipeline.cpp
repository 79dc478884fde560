#include "wnsf/pipeline.hpp"

#include "wnsf/bkfit.hpp"
#include "wnsf/nullspace.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace wnsf {

namespace {

double eta_residual(const MarkovEstimate& markov, const Matrix& phi, const RowVector& eta) {
  return (vec_row(markov.g_hat) - eta * phi).norm();
}

bool better(double candidate, double best) { return candidate < best - 1e-9 * std::abs(best) - 1e-15; }

}  // namespace

FitResult wnsf_fit_markov(const MarkovEstimate& markov, const CanonicalStructure& s, const WnsfOptions& opt) {
  if (markov.n_y != s.n_y || markov.n_u != s.n_u) throw_invalid("pipeline", "structure does not match the data");
  if (markov.order <= s.n_x) throw_invalid("pipeline", "HOARX order must exceed n_x");
  if (opt.a_iterations < 0 || opt.eta_iterations < 0) throw_invalid("pipeline", "iterations must be non-negative");

  FitResult out;
  out.structure = s;
  FitReport& rep = out.report;
  rep.structure = s.label();
  rep.order = markov.order;
  rep.effective_samples = markov.effective_samples;
  rep.sigma_e2_hat = markov.sigma_e2_hat;
  rep.a_iterations = opt.a_iterations;
  rep.eta_iterations = opt.eta_iterations;

  const std::vector<Matrix> g = markov.markov();
  AdmissibilityResult adm = check_admissibility(g, s);
  rep.admissible = adm.admissible;
  rep.admissibility_condition = adm.condition;
  rep.admissibility_residual = adm.residual;
  if (!(adm.smallest_singular > 1e-8)) {
    std::ostringstream os;
    os << "structure " << s.label() << " failed the basis-row rank test (relative smallest singular value "
       << adm.smallest_singular << ")";
    throw_numerical("admissibility", os.str());
  }

  // Steps 2-3.
  HankelStack hankel = build_hankel(g, s);
  rep.plus_condition = plus_condition(hankel);
  out.a_ols = ols_a(hankel);
  rep.ols_a_residual = nullspace_residual(hankel, out.a_ols);
  out.a_wls = opt.a_iterations > 0 ? wls_a(hankel, markov, out.a_ols, opt.a_iterations, &rep.warnings) : out.a_ols;
  rep.wls_a_residual = nullspace_residual(hankel, out.a_wls);

  // Step 4.
  ParameterVector shape{out.a_wls, RowVector::Zero(s.eta_count())};
  const Matrix ak = assemble_from_parameters(shape, s).model.A_K();
  ObservabilityMatrix obs = extended_observability(ak, s.canonical_c(), markov.order);
  out.eta_ols = ols_eta(markov, obs);
  const Matrix phi = build_phi(obs, s.n_z());
  rep.ols_eta_residual = eta_residual(markov, phi, out.eta_ols);

  // Step 5.
  out.eta_wls = opt.eta_iterations > 0
                    ? wls_eta(markov, hankel, out.a_wls, out.eta_ols, opt.eta_iterations, &rep.warnings)
                    : out.eta_ols;
  rep.wls_eta_residual = eta_residual(markov, phi, out.eta_wls);

  out.params = ParameterVector{out.a_wls, out.eta_wls};
  AssembledModel assembled = assemble_from_parameters(out.params, s, markov.sigma_e2_hat);
  out.model = assembled.model;
  rep.predictor_radius = assembled.predictor_radius;
  rep.predictor_stable = assembled.predictor_stable;
  if (!assembled.predictor_stable) rep.warnings.push_back("estimated predictor is not stable");
  return out;
}

FitResult wnsf_fit_markov_auto(const MarkovEstimate& markov, int n_x, const WnsfOptions& opt) {
  std::optional<FitResult> best;
  double best_score = INFINITY;
  std::vector<CandidateReport> candidates;
  const Matrix& g_row = markov.g_hat;
  for (const CanonicalStructure& s : enumerate_kronecker_indices(n_x, markov.n_y, markov.n_u)) {
    CandidateReport c{s.label(), markov.order, false, 0.0, {}};
    try {
      FitResult fit = wnsf_fit_markov(markov, s, opt);
      const Matrix fitted = markov_row(markov_parameters(fit.model, markov.order));
      c.score = (fitted - g_row).norm() / std::max(g_row.norm(), 1e-300);
      c.ok = true;
      if (!best || better(c.score, best_score)) {
        best_score = c.score;
        best = std::move(fit);
      }
    } catch (const Error& e) {
      c.error = e.what();
    }
    candidates.push_back(c);
  }
  if (!best) throw_numerical("pipeline", "no Kronecker index produced an admissible fit");
  best->report.candidates = candidates;
  return std::move(*best);
}

double prediction_error(const StateSpaceModel& model, const Dataset& data, Index skip) {
  Prediction p = predict_one_step(model, data);
  skip = std::clamp<Index>(skip, 0, data.samples() - 1);
  const Index rows = data.samples() - skip;
  return p.residuals.bottomRows(rows).squaredNorm() / static_cast<double>(rows * data.n_y());
}

FitResult wnsf_fit(const Dataset& data, int n_x, int order, const std::optional<CanonicalStructure>& structure,
                   const WnsfOptions& opt) {
  if (n_x < 1) throw_invalid("pipeline", "n_x must be positive");
  if (order <= n_x) throw_invalid("pipeline", "HOARX order must exceed n_x");

  MarkovEstimate markov;
  try {
    markov = estimate_hoarx(data, order, std::max(opt.ridge, 0.0));
  } catch (const Error& e) {
    if (opt.ridge >= 0.0 || e.kind() != ErrorKind::Numerical) throw;
    // trace(R_n) / dim is the mean power of z.
    const double power = data.z().squaredNorm() / static_cast<double>(data.samples() * data.n_z());
    markov = estimate_hoarx(data, order, 1e-10 * power);
  }

  const double gram_min =
      Eigen::SelfAdjointEigenSolver<Matrix>(markov.gram, Eigen::EigenvaluesOnly).eigenvalues()(0);

  auto finish = [&](FitResult fit) {
    fit.report.samples = data.samples();
    fit.report.gram_min_eigenvalue = gram_min;
    fit.report.prediction_error = prediction_error(fit.model, data, order);
    return fit;
  };

  if (structure) return finish(wnsf_fit_markov(markov, *structure, opt));

  std::optional<FitResult> best;
  std::vector<CandidateReport> candidates;
  for (const CanonicalStructure& s : enumerate_kronecker_indices(n_x, data.n_y(), data.n_u())) {
    CandidateReport c{s.label(), order, false, 0.0, {}};
    try {
      FitResult fit = finish(wnsf_fit_markov(markov, s, opt));
      c.ok = true;
      c.score = *fit.report.prediction_error;
      if (!best || better(c.score, *best->report.prediction_error)) best = std::move(fit);
    } catch (const Error& e) {
      c.error = e.what();
    }
    candidates.push_back(c);
  }
  if (!best) throw_numerical("pipeline", "no Kronecker index produced an admissible fit");
  best->report.candidates = candidates;
  return std::move(*best);
}

std::vector<int> default_order_grid(int n_x, Index samples) {
  const int cap = static_cast<int>(std::min<Index>(10 * n_x, samples / 10));
  std::vector<int> grid;
  for (int n = 2 * n_x; n <= cap; n += n_x) grid.push_back(n);
  if (grid.empty()) grid.push_back(std::max(n_x + 1, cap));
  return grid;
}

OrderSelection select_order(const Dataset& data, std::vector<int> grid, int n_x,
                            const std::optional<CanonicalStructure>& structure, const WnsfOptions& opt) {
  if (grid.empty()) throw_invalid("select_order", "empty order grid");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::optional<OrderSelection> best;
  double best_score = INFINITY;
  std::vector<CandidateReport> candidates;
  // Score every order on the same samples so that the comparison is fair.
  const Index skip = grid.back();
  for (int n : grid) {
    CandidateReport c{structure ? structure->label() : std::string("auto"), n, false, 0.0, {}};
    try {
      FitResult fit = wnsf_fit(data, n_x, n, structure, opt);
      c.score = prediction_error(fit.model, data, skip);
      c.ok = true;
      if (!best || better(c.score, best_score)) {
        best_score = c.score;
        best = OrderSelection{n, std::move(fit)};
      }
    } catch (const Error& e) {
      c.error = e.what();
    }
    candidates.push_back(c);
  }
  if (!best) throw_numerical("select_order", "every order in the grid failed");
  best->fit.report.candidates = candidates;
  return std::move(*best);
}

}  // namespace wnsf
