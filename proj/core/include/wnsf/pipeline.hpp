#pragma once

#include "wnsf/dataset.hpp"
#include "wnsf/hoarx.hpp"
#include "wnsf/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace wnsf {

struct WnsfOptions {
  int a_iterations = 1;    ///< WLS passes for the a-rows
  int eta_iterations = 1;  ///< WLS passes for eta
  double ridge = 0.0;      ///< HOARX ridge; negative selects default_ridge()
};

struct CandidateReport {
  std::string structure;
  int order = 0;
  bool ok = false;
  double score = 0.0;  ///< prediction error, or Markov mismatch for Markov-only fits
  std::string error;
};

struct FitReport {
  std::string structure;
  int order = 0;
  Index samples = 0;
  Index effective_samples = 0;
  double sigma_e2_hat = 0.0;
  double gram_min_eigenvalue = 0.0;
  double plus_condition = 0.0;
  bool admissible = false;
  double admissibility_condition = 0.0;
  double admissibility_residual = 0.0;
  double ols_a_residual = 0.0;
  double wls_a_residual = 0.0;
  double ols_eta_residual = 0.0;
  double wls_eta_residual = 0.0;
  double predictor_radius = 0.0;
  bool predictor_stable = false;
  std::optional<double> prediction_error;
  int a_iterations = 0;
  int eta_iterations = 0;
  std::vector<std::string> warnings;
  std::vector<CandidateReport> candidates;
};

struct FitResult {
  StateSpaceModel model;
  CanonicalStructure structure;
  ParameterVector params;
  std::vector<RowVector> a_ols;
  std::vector<RowVector> a_wls;
  RowVector eta_ols;
  RowVector eta_wls;
  FitReport report;
};

/// Steps 2-5 on a given Step-1 estimate.
FitResult wnsf_fit_markov(const MarkovEstimate& markov, const CanonicalStructure& structure,
                          const WnsfOptions& options = {});

/// Steps 2-5 for every Kronecker index; keeps the best reproduction of the Markov parameters.
FitResult wnsf_fit_markov_auto(const MarkovEstimate& markov, int n_x, const WnsfOptions& options = {});

/// Full procedure at a fixed HOARX order. An empty structure selects it automatically
/// by one-step prediction error.
FitResult wnsf_fit(const Dataset& data, int n_x, int order, const std::optional<CanonicalStructure>& structure,
                   const WnsfOptions& options = {});

/// {2 n_x, 3 n_x, ...} capped at min(10 n_x, N / 10).
std::vector<int> default_order_grid(int n_x, Index samples);

struct OrderSelection {
  int order = 0;
  FitResult fit;
};

/// Fits every order in the grid, returns the smallest prediction error; ties go to the smaller order.
OrderSelection select_order(const Dataset& data, std::vector<int> grid, int n_x,
                            const std::optional<CanonicalStructure>& structure, const WnsfOptions& options = {});

/// Mean squared one-step prediction error after the first `skip` samples.
double prediction_error(const StateSpaceModel& model, const Dataset& data, Index skip = 0);

}  // namespace wnsf
