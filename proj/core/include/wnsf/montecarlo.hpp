#pragma once

#include "wnsf/linalg.hpp"
#include "wnsf/model.hpp"
#include "wnsf/pipeline.hpp"
#include "wnsf/simulate.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace wnsf {

enum class Coordinates { Canonical, Armax };

struct MonteCarloConfig {
  StateSpaceModel model;  ///< true system, already in the canonical form of `structure`
  CanonicalStructure structure;
  ExperimentConfig experiment;  ///< `samples` is replaced by each grid entry
  int trials = 100;
  std::vector<Index> sample_grid;
  std::vector<int> order_grid;  ///< one order per sample size; empty selects default_mc_order
  WnsfOptions options;
  Coordinates coordinates = Coordinates::Canonical;
  int threads = 0;  ///< 0: WNSF_THREADS or hardware concurrency
};

struct GridResult {
  Index samples = 0;
  int order = 0;
  int succeeded = 0;
  int failed = 0;
  Matrix wls;  ///< successful trials x parameters, in trial order
  Matrix ols;
  Vector mse_wls;
  Vector mse_ols;
  Vector bound;  ///< sigma_e2 (M^{-1})_ii / N
  Vector ratio_wls;
  Vector ratio_ols;
  std::vector<std::string> errors;
};

struct MonteCarloResult {
  std::vector<std::string> names;
  Vector truth;
  Matrix covariance;  ///< sigma_e2 M^{-1} in the reported coordinates
  std::vector<GridResult> grid;
};

/// max(2 n_x + 1, round(10 ln N) - 20), capped at N / 10.
int default_mc_order(int n_x, Index samples);

/// Worker count: explicit request, else WNSF_THREADS, else hardware concurrency.
int worker_count(int requested);

/// Runs fn(i) for i in [0, count) on a pool of `workers` threads.
void parallel_for(int count, int workers, const std::function<void(int)>& fn);

MonteCarloResult run_monte_carlo(const MonteCarloConfig& config);

}  // namespace wnsf
